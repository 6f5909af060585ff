#pragma once

#include <memory>

#include "glyphsynth/nn/layers.hpp"

namespace glyphsynth {

struct DiscConfig {
    int img_size = 128;
    int ch = 16;
    int n_blocks = 5;
    bool use_dec_head = true;  // off = encoder-only discriminator (ablation)

    int enc_channels(int block) const;
    void validate() const;
};

struct DiscOutputs {
    nn::Var enc_logit;      // [N] per-image logit
    nn::Var dec_logit_map;  // [N,1,S,S]; undefined when the decoder head is off
};

// Residual U-Net critic: 5 norm-free LeakyReLU down blocks, a linear encoder
// head on the pooled bottleneck, and a skip-connected decoder emitting a
// per-pixel logit map.
class UnetDiscriminator : public nn::Module {
public:
    explicit UnetDiscriminator(DiscConfig cfg);
    ~UnetDiscriminator() override;

    const DiscConfig& config() const { return cfg_; }

    // zero_skips substitutes zero tensors for the encoder skips (test hook
    // for the skip-dependency contract).
    DiscOutputs discriminate(const nn::Var& images, bool zero_skips = false);

private:
    class DownBlock;
    class UpBlock;

    DiscConfig cfg_;
    std::vector<std::unique_ptr<DownBlock>> down_;
    std::vector<std::unique_ptr<UpBlock>> up_;
    nn::Linear enc_head_;
    std::unique_ptr<nn::Conv2d> dec_out_;
};

}  // namespace glyphsynth
