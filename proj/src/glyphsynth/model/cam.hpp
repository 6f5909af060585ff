#pragma once

#include <array>
#include <memory>

#include <nlohmann/json.hpp>

#include "glyphsynth/decomposition.hpp"
#include "glyphsynth/nn/layers.hpp"

namespace glyphsynth {

struct CamConfig {
    int img_size = 128;
    std::array<int, 5> channels = {96, 128, 160, 256, 256};
    int hidden = 256;  // GRU units; also the attention-energy input width
    int embed = 256;   // previous-token embedding dimension
    int n_styles = 0;
    int vocab_size = 0;  // component vocabulary including EOS
    int t_max = 24;
    std::array<int, 3> cls_channels = {256, 512, 512};
    std::array<int, 3> comp_channels = {128, 64, 16};

    // Four maxpools (after conv 1, 2, 3, 5) -> grid = img_size / 16.
    int grid() const { return img_size / 16; }
    int grid_cells() const { return grid() * grid(); }
    void validate() const;

    nlohmann::json to_json() const;
    static CamConfig from_json(const nlohmann::json& j);
};

// Per-step attention rollout over a batch. `logits[t]` are raw (softmax lives
// in the loss); every `alphas[t]` row is a simplex over the feature grid.
struct BatchRollout {
    std::vector<nn::Var> logits;  // steps x [B, vocab]
    std::vector<nn::Var> alphas;  // steps x [B, L]
    std::vector<int> lengths;     // per-sample component count (excl. EOS)
    std::vector<std::vector<int>> predictions;  // greedy decode only

    int steps() const { return static_cast<int>(logits.size()); }
};

namespace detail {

// Table-layout feature encoder: conv7(96)+pool, conv3(128)+pool,
// conv3(160)+pool, conv3(256), conv3(256)+pool; BN+PReLU throughout.
class CamFeatureEncoder : public nn::Module {
public:
    explicit CamFeatureEncoder(const CamConfig& cfg);
    nn::Var forward(const nn::Var& x);

private:
    std::vector<std::unique_ptr<nn::Conv2d>> convs_;
    std::vector<std::unique_ptr<nn::BatchNorm2d>> norms_;
    std::vector<std::unique_ptr<nn::PReLU>> acts_;
};

class StyleClassifierHead : public nn::Module {
public:
    StyleClassifierHead(const CamConfig& cfg);
    nn::Var forward(const nn::Var& feat);  // -> [N, n_styles]

private:
    nn::Conv2d c1_, c2_, c3_, c4_;
    nn::InstanceNorm2d n1_, n2_, n3_;
    nn::PReLU a1_, a2_, a3_;
};

class ComponentDiscriminatorHead : public nn::Module {
public:
    ComponentDiscriminatorHead(const CamConfig& cfg);
    nn::Var forward(const nn::Var& feat);  // -> [N, 1, h', w'] score map

private:
    nn::Conv2d c1_, c2_, c3_, c4_;
    nn::InstanceNorm2d n1_, n2_, n3_;
    nn::PReLU a1_, a2_, a3_;
};

}  // namespace detail

class AttentionDecoder : public nn::Module {
public:
    explicit AttentionDecoder(const CamConfig& cfg);

    int go_token() const { return cfg_.vocab_size; }  // embedding row past EOS

    // Energy from the previous state and token only (no h_i term):
    //   e = tanh(s W_s + emb(y_prev) W_y + b), alpha = softmax(e),
    //   g = sum_i alpha_i h_i
    struct Attend {
        nn::Var alpha;  // [B, L]
        nn::Var glimpse;  // [B, C]
    };
    Attend attend(const nn::Var& state, const nn::Var& y_prev_emb, const nn::Var& feat) const;

    struct StepOut {
        nn::Var logits;  // [B, vocab]
        nn::Var state;
        nn::Var alpha;
    };
    StepOut decode_step(const nn::Var& state, const std::vector<int>& y_prev_ids,
                        const nn::Var& feat) const;

    nn::Var initial_state(int batch) const;  // zeros [B, hidden]

    // Teacher forcing: exactly max(T_i)+1 steps feeding ground-truth tokens.
    BatchRollout decode_teacher_forced(const nn::Var& feat,
                                       const std::vector<ComponentSequence>& targets) const;

    // Argmax feeding; stops at EOS (per sample) or after t_max+1 steps.
    BatchRollout decode_greedy(const nn::Var& feat) const;

private:
    CamConfig cfg_;
    nn::Embedding embedding_;
    nn::GRUCell gru_;
    nn::Parameter* w_s_;  // [hidden, L]
    nn::Parameter* w_y_;  // [embed, L]
    nn::Parameter* b_;    // [L]
    nn::Linear out_;
};

// alpha reshaped over the grid, broadcast across channels.
nn::Var mask_features(const nn::Var& feat, const nn::Var& alpha);

class Cam : public nn::Module {
public:
    explicit Cam(CamConfig cfg);

    const CamConfig& config() const { return cfg_; }

    nn::Var encode_features(const nn::Var& images);            // [N,C,g,g]
    nn::Var classify_style(const nn::Var& feat);               // [N,n_styles]
    nn::Var discriminate_component(const nn::Var& feat);       // [N,1,h',w']
    AttentionDecoder& decoder() { return decoder_; }
    const AttentionDecoder& decoder() const { return decoder_; }

    // Forward-call counter for the inference-profiling contract (the CLI
    // generate path must never touch the CAM).
    static int64_t forward_calls();
    static void reset_forward_calls();

private:
    CamConfig cfg_;
    detail::CamFeatureEncoder encoder_;
    AttentionDecoder decoder_;
    detail::StyleClassifierHead cls_;
    detail::ComponentDiscriminatorHead comp_;
};

// Sequence accuracy of greedy predictions against ground truth.
double sequence_accuracy(const std::vector<std::vector<int>>& predictions,
                         const std::vector<ComponentSequence>& targets);

}  // namespace glyphsynth
