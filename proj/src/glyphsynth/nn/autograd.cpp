#include "glyphsynth/nn/autograd.hpp"

#include <unordered_set>

namespace glyphsynth::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    if (g_grad_enabled) {
        bool needs = false;
        for (const Var& p : parents) {
            if (p.requires_grad()) {
                needs = true;
                break;
            }
        }
        if (needs) {
            n->requires_grad = true;
            n->parents.reserve(parents.size());
            for (const Var& p : parents) n->parents.push_back(p.node_ptr());
            n->backward_fn = std::move(backward_fn);
        }
    }
    return Var(std::move(n));
}

void accumulate(Node& node, const Tensor& t) {
    Tensor& g = node.grad_ref();
    const double* src = t.data();
    double* dst = g.data();
    const int64_t n = g.numel();
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

namespace {

// Iterative post-order topological sort over nodes that require grad.
void topo_collect(Node* root, std::vector<Node*>& order) {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* parent = node->parents[idx].get();
            ++idx;
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

}  // namespace

void Var::backward(const Tensor& seed) const {
    check(node_ != nullptr, "backward on undefined Var");
    check(node_->requires_grad, "backward on a graph with no differentiable leaves");
    check(seed.same_shape(node_->value), "backward: seed shape mismatch");

    std::vector<Node*> order;
    topo_collect(node_.get(), order);

    accumulate(*node_, seed);
    // order is post-order (parents before children); walk in reverse.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            n->backward_fn(*n);
        }
    }
    // Release interior graph state so a second backward can't silently reuse it
    // and so activation memory is reclaimed promptly.
    for (Node* n : order) {
        if (n->backward_fn) {
            n->backward_fn = nullptr;
            n->parents.clear();
            n->parents.shrink_to_fit();
        }
    }
}

void Var::backward() const {
    Tensor seed = Tensor::full(node_->value.shape(), 1.0);
    backward(seed);
}

}  // namespace glyphsynth::nn
