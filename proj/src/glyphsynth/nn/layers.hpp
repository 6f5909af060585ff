#pragma once

#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "glyphsynth/nn/ops.hpp"
#include "glyphsynth/rng.hpp"

namespace glyphsynth::nn {

enum class ParamKind { ConvWeight, LinearWeight, Bias, NormScale, NormShift, PReLUSlope, Embedding };

struct Parameter {
    std::string name;
    ParamKind kind;
    Var var;
};

struct BufferSlot {
    std::string name;
    Tensor* tensor;
};

// Base for everything with trainable state. Parameters and children are
// reported in registration order, which keeps init and checkpoint layouts
// deterministic.
class Module {
public:
    virtual ~Module() = default;

    std::vector<Parameter*> parameters();
    void named_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Parameter*>>& out);
    void named_buffers(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor*>>& out);

    void set_training(bool training);
    bool training() const { return training_; }

    // Freeze/unfreeze gradient accumulation for every parameter.
    void set_requires_grad(bool rg);

    int64_t param_count();

protected:
    Parameter& reg_param(std::string name, ParamKind kind, std::vector<int64_t> shape);
    void reg_buffer(std::string name, Tensor* t);
    void reg_child(std::string name, Module* m);

private:
    // deque: reg_param hands out stable references across registrations
    std::deque<Parameter> params_;
    std::vector<BufferSlot> buffers_;
    std::vector<std::pair<std::string, Module*>> children_;
    bool training_ = true;
};

// Fills parameters per kind: conv/linear/embedding weights ~ N(0, std^2),
// biases and norm shifts zero, norm scales one, PReLU slopes 0.25.
void init_gaussian(Module& m, double std, Rng& rng);

class Conv2d : public Module {
public:
    Conv2d(int64_t in_ch, int64_t out_ch, int k, int stride, int pad, bool bias = true);
    Var forward(const Var& x) const;

private:
    Parameter* w_;
    Parameter* b_ = nullptr;
    int stride_, pad_;
};

class Linear : public Module {
public:
    Linear(int64_t in, int64_t out, bool bias = true);
    Var forward(const Var& x) const;

private:
    Parameter* w_;
    Parameter* b_ = nullptr;
};

class InstanceNorm2d : public Module {
public:
    explicit InstanceNorm2d(int64_t channels, double eps = 1e-5);
    Var forward(const Var& x) const;

private:
    Parameter* gamma_;
    Parameter* beta_;
    double eps_;
};

class BatchNorm2d : public Module {
public:
    explicit BatchNorm2d(int64_t channels, double eps = 1e-5, double momentum = 0.1);
    Var forward(const Var& x);

private:
    Parameter* gamma_;
    Parameter* beta_;
    Tensor running_mean_, running_var_;
    double eps_, momentum_;
};

class PReLU : public Module {
public:
    explicit PReLU(int64_t channels);
    Var forward(const Var& x) const;

private:
    Parameter* slope_;
};

class Embedding : public Module {
public:
    Embedding(int64_t vocab, int64_t dim);
    Var forward(const std::vector<int>& ids) const;
    int64_t dim() const { return dim_; }

private:
    Parameter* table_;
    int64_t dim_;
};

// Gate order (r, z, n), layout matching the stacked weight convention:
//   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
class GRUCell : public Module {
public:
    GRUCell(int64_t input_dim, int64_t hidden_dim);
    Var forward(const Var& x, const Var& h) const;
    int64_t hidden_dim() const { return hidden_; }

private:
    Parameter* w_ih_;  // [3H, in]
    Parameter* b_ih_;  // [3H]
    Parameter* w_hh_;  // [3H, H]
    Parameter* b_hh_;  // [3H]
    int64_t hidden_;
};

class Adam {
public:
    Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2,
         double eps = 1e-8);

    void step();
    void zero_grad();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    int64_t t() const { return t_; }

    // Flat state access for checkpointing; order matches the param list.
    struct State {
        Tensor m, v;
    };
    std::vector<State>& states() { return states_; }
    const std::vector<Parameter*>& params() const { return params_; }
    void set_t(int64_t t) { t_ = t; }

private:
    std::vector<Parameter*> params_;
    std::vector<State> states_;
    double lr_, b1_, b2_, eps_;
    int64_t t_ = 0;
};

// Central-difference gradient verification. `forward` must recompute the loss
// value from current leaf values (no graph needed). Leaves must already carry
// analytic gradients. Checks up to `max_coords` randomly chosen coordinates
// per leaf and returns the worst relative error.
double gradcheck_max_rel_err(const std::function<double()>& forward,
                             const std::vector<Var>& leaves, Rng& rng, int max_coords,
                             double h = 1e-5);

}  // namespace glyphsynth::nn
