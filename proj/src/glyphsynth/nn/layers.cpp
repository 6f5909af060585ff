#include "glyphsynth/nn/layers.hpp"

#include <cmath>

namespace glyphsynth::nn {

std::vector<Parameter*> Module::parameters() {
    std::vector<std::pair<std::string, Parameter*>> named;
    named_parameters("", named);
    std::vector<Parameter*> out;
    out.reserve(named.size());
    for (auto& [name, p] : named) out.push_back(p);
    return out;
}

void Module::named_parameters(const std::string& prefix,
                              std::vector<std::pair<std::string, Parameter*>>& out) {
    for (Parameter& p : params_) out.emplace_back(prefix + p.name, &p);
    for (auto& [name, child] : children_) child->named_parameters(prefix + name + ".", out);
}

void Module::named_buffers(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor*>>& out) {
    for (BufferSlot& b : buffers_) out.emplace_back(prefix + b.name, b.tensor);
    for (auto& [name, child] : children_) child->named_buffers(prefix + name + ".", out);
}

void Module::set_training(bool training) {
    training_ = training;
    for (auto& [name, child] : children_) child->set_training(training);
}

void Module::set_requires_grad(bool rg) {
    for (Parameter* p : parameters()) p->var.set_requires_grad(rg);
}

int64_t Module::param_count() {
    int64_t n = 0;
    for (Parameter* p : parameters()) n += p->var.val().numel();
    return n;
}

Parameter& Module::reg_param(std::string name, ParamKind kind, std::vector<int64_t> shape) {
    params_.push_back(Parameter{std::move(name), kind, Var::param(Tensor(std::move(shape)))});
    return params_.back();
}

void Module::reg_buffer(std::string name, Tensor* t) {
    buffers_.push_back(BufferSlot{std::move(name), t});
}

void Module::reg_child(std::string name, Module* m) {
    children_.emplace_back(std::move(name), m);
}

void init_gaussian(Module& m, double std, Rng& rng) {
    for (Parameter* p : m.parameters()) {
        Tensor& t = p->var.val();
        switch (p->kind) {
            case ParamKind::ConvWeight:
            case ParamKind::LinearWeight:
            case ParamKind::Embedding:
                for (double& v : t) v = rng.gauss(0.0, std);
                break;
            case ParamKind::Bias:
            case ParamKind::NormShift:
                t.fill(0.0);
                break;
            case ParamKind::NormScale:
                t.fill(1.0);
                break;
            case ParamKind::PReLUSlope:
                t.fill(0.25);
                break;
        }
    }
}

Conv2d::Conv2d(int64_t in_ch, int64_t out_ch, int k, int stride, int pad, bool bias)
    : stride_(stride), pad_(pad) {
    w_ = &reg_param("weight", ParamKind::ConvWeight, {out_ch, in_ch, k, k});
    if (bias) b_ = &reg_param("bias", ParamKind::Bias, {out_ch});
}

Var Conv2d::forward(const Var& x) const {
    return conv2d(x, w_->var, b_ ? b_->var : Var(), stride_, pad_);
}

Linear::Linear(int64_t in, int64_t out, bool bias) {
    w_ = &reg_param("weight", ParamKind::LinearWeight, {out, in});
    if (bias) b_ = &reg_param("bias", ParamKind::Bias, {out});
}

Var Linear::forward(const Var& x) const { return linear(x, w_->var, b_ ? b_->var : Var()); }

InstanceNorm2d::InstanceNorm2d(int64_t channels, double eps) : eps_(eps) {
    gamma_ = &reg_param("weight", ParamKind::NormScale, {channels});
    beta_ = &reg_param("bias", ParamKind::NormShift, {channels});
}

Var InstanceNorm2d::forward(const Var& x) const {
    return add_channel(mul_channel(instance_norm(x, eps_), gamma_->var), beta_->var);
}

BatchNorm2d::BatchNorm2d(int64_t channels, double eps, double momentum)
    : running_mean_({channels}), running_var_(Tensor::full({channels}, 1.0)),
      eps_(eps), momentum_(momentum) {
    gamma_ = &reg_param("weight", ParamKind::NormScale, {channels});
    beta_ = &reg_param("bias", ParamKind::NormShift, {channels});
    reg_buffer("running_mean", &running_mean_);
    reg_buffer("running_var", &running_var_);
}

Var BatchNorm2d::forward(const Var& x) {
    Var xhat;
    if (training()) {
        BatchNormResult r = batch_norm_train(x, eps_);
        const int64_t C = running_mean_.numel();
        const int64_t m = x.val().size(0) * x.val().size(2) * x.val().size(3);
        // Unbiased variance feeds the running estimate, as is conventional.
        const double unbias = m > 1 ? static_cast<double>(m) / static_cast<double>(m - 1) : 1.0;
        for (int64_t c = 0; c < C; ++c) {
            running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * r.batch_mean[c];
            running_var_[c] =
                (1.0 - momentum_) * running_var_[c] + momentum_ * r.batch_var[c] * unbias;
        }
        xhat = r.y;
    } else {
        xhat = batch_norm_eval(x, running_mean_, running_var_, eps_);
    }
    return add_channel(mul_channel(xhat, gamma_->var), beta_->var);
}

PReLU::PReLU(int64_t channels) {
    slope_ = &reg_param("weight", ParamKind::PReLUSlope, {channels});
}

Var PReLU::forward(const Var& x) const { return prelu(x, slope_->var); }

Embedding::Embedding(int64_t vocab, int64_t dim) : dim_(dim) {
    table_ = &reg_param("weight", ParamKind::Embedding, {vocab, dim});
}

Var Embedding::forward(const std::vector<int>& ids) const { return embedding(table_->var, ids); }

GRUCell::GRUCell(int64_t input_dim, int64_t hidden_dim) : hidden_(hidden_dim) {
    w_ih_ = &reg_param("weight_ih", ParamKind::LinearWeight, {3 * hidden_dim, input_dim});
    b_ih_ = &reg_param("bias_ih", ParamKind::Bias, {3 * hidden_dim});
    w_hh_ = &reg_param("weight_hh", ParamKind::LinearWeight, {3 * hidden_dim, hidden_dim});
    b_hh_ = &reg_param("bias_hh", ParamKind::Bias, {3 * hidden_dim});
}

Var GRUCell::forward(const Var& x, const Var& h) const {
    const int64_t H = hidden_;
    Var gi = linear(x, w_ih_->var, b_ih_->var);   // [N, 3H]
    Var gh = linear(h, w_hh_->var, b_hh_->var);   // [N, 3H]
    Var r = sigmoid_op(add(slice_cols(gi, 0, H), slice_cols(gh, 0, H)));
    Var z = sigmoid_op(add(slice_cols(gi, H, 2 * H), slice_cols(gh, H, 2 * H)));
    Var n = tanh_op(add(slice_cols(gi, 2 * H, 3 * H), mul(r, slice_cols(gh, 2 * H, 3 * H))));
    // h' = (1-z)*n + z*h = n + z*(h - n)
    return add(n, mul(z, sub(h, n)));
}

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    states_.reserve(params_.size());
    for (Parameter* p : params_)
        states_.push_back(State{Tensor::zeros(p->var.shape()), Tensor::zeros(p->var.shape())});
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Parameter* p = params_[i];
        if (!p->var.has_grad()) continue;
        const Tensor& g = p->var.grad();
        Tensor& m = states_[i].m;
        Tensor& v = states_[i].v;
        Tensor& x = p->var.val();
        for (int64_t j = 0; j < x.numel(); ++j) {
            m[j] = b1_ * m[j] + (1.0 - b1_) * g[j];
            v[j] = b2_ * v[j] + (1.0 - b2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            x[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->var.zero_grad();
}

double gradcheck_max_rel_err(const std::function<double()>& forward,
                             const std::vector<Var>& leaves, Rng& rng, int max_coords, double h) {
    double worst = 0.0;
    for (const Var& leaf : leaves) {
        Tensor& x = const_cast<Var&>(leaf).val();
        const Tensor& g = leaf.grad();
        check(g.defined(), "gradcheck: leaf has no analytic gradient");
        const int64_t n = x.numel();
        std::vector<int64_t> coords;
        if (n <= max_coords) {
            for (int64_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (int k = 0; k < max_coords; ++k)
                coords.push_back(static_cast<int64_t>(rng.below(static_cast<uint64_t>(n))));
        }
        for (int64_t i : coords) {
            const double orig = x[i];
            x[i] = orig + h;
            const double fp = forward();
            x[i] = orig - h;
            const double fm = forward();
            x[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            // absolute floor keeps finite-difference noise on near-zero
            // gradients from masquerading as relative error
            const double denom = std::fabs(fd) + std::fabs(g[i]) + 1e-3;
            worst = std::max(worst, std::fabs(fd - g[i]) / denom);
        }
    }
    return worst;
}

}  // namespace glyphsynth::nn
