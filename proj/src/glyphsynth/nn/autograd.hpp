#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "glyphsynth/nn/tensor.hpp"

namespace glyphsynth::nn {

// Reverse-mode autodiff over a dynamically built graph. A Var is a handle to
// a graph node; ops in ops.hpp create nodes whose backward closures push
// gradients into their parents. Parameters are leaf nodes that survive
// between steps; everything else dies with the last Var handle.

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Receives *this; reads this->grad, accumulates into parents' grads.
    std::function<void(Node&)> backward_fn;

    Tensor& grad_ref() {
        if (!grad.defined()) grad = Tensor::zeros(value.shape());
        return grad;
    }
};

// Thread-local switch: when disabled, ops produce constant nodes (no parents,
// no closures). Used for inference and for detached fake branches.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    // Leaf constant (no gradient).
    static Var constant(Tensor value) {
        auto n = std::make_shared<Node>();
        n->value = std::move(value);
        return Var(std::move(n));
    }

    // Leaf parameter (accumulates gradient).
    static Var param(Tensor value) {
        auto n = std::make_shared<Node>();
        n->value = std::move(value);
        n->requires_grad = true;
        return Var(std::move(n));
    }

    bool defined() const { return node_ != nullptr; }
    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

    const Tensor& val() const { return node_->value; }
    Tensor& val() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad.defined(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    void zero_grad() {
        if (node_ && node_->grad.defined()) node_->grad.fill(0.0);
    }

    // New leaf sharing this node's storage, cut from the graph.
    Var detach() const {
        auto n = std::make_shared<Node>();
        n->value = node_->value;
        return Var(std::move(n));
    }

    const std::vector<int64_t>& shape() const { return node_->value.shape(); }
    double item() const { return node_->value.item(); }

    // Backpropagates from this node (seed = ones for scalars, or `seed`).
    // Interior closures and parent links are released afterwards.
    void backward() const;
    void backward(const Tensor& seed) const;

private:
    std::shared_ptr<Node> node_;
};

// Builds an op node. `parents` that don't require grad are still recorded (the
// closure may read their values), but the node only requires grad if some parent does.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

// Accumulate t into node's grad buffer.
void accumulate(Node& node, const Tensor& t);

}  // namespace glyphsynth::nn
