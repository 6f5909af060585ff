#pragma once

#include <memory>

#include "glyphsynth/nn/layers.hpp"

namespace glyphsynth {

struct GeneratorConfig {
    int img_size = 128;
    int ch = 64;      // channel multiplier
    int n_blocks = 5;
    int d_s = 256;    // style latent dimension
    bool use_style_latent = true;  // AdaIN injection; off = plain learned IN (ablation)

    // Encoder output channels per block: ch, 2ch, 4ch, 8ch, 8ch (capped).
    int enc_channels(int block) const;
    int bottleneck_size() const;  // img_size / 2^n_blocks
    void validate() const;
};

// scale/bias are per-sample per-channel [N,C]; sigma uses the 1e-5 epsilon.
nn::Var adain(const nn::Var& x, const nn::Var& scale, const nn::Var& bias);

struct StyleBundle {
    nn::Var feature_map;  // X_s: [N, C_e, s, s]
    nn::Var latent;       // f_s: [N, d_s]
};

struct ContentFeature {
    nn::Var feature_map;         // X_c, same dims as X_s
    std::vector<nn::Var> skips;  // one per down block, highest resolution first
};

namespace detail {

// Pre-activation residual down block: IN-ReLU-conv3 x2 + avgpool, learned
// 1x1 shortcut when channels change.
class DownBlock : public nn::Module {
public:
    DownBlock(int64_t in_ch, int64_t out_ch);
    nn::Var forward(const nn::Var& x);

private:
    nn::InstanceNorm2d in1_, in2_;
    nn::Conv2d conv1_, conv2_;
    std::unique_ptr<nn::Conv2d> shortcut_;
};

// Residual up block; AdaIN (driven by f_s) or learned IN at both norm sites.
class UpBlock : public nn::Module {
public:
    UpBlock(int64_t in_ch, int64_t out_ch, int64_t d_s, bool use_style_latent);
    nn::Var forward(const nn::Var& x, const nn::Var& f_s);

private:
    nn::Var normalize(const nn::Var& x, const nn::Var& f_s, int site);

    int64_t in_ch_, out_ch_;
    bool use_style_latent_;
    nn::Conv2d conv1_, conv2_, shortcut_;
    std::unique_ptr<nn::Linear> affine1_, affine2_;        // f_s -> (scale-1, bias)
    std::unique_ptr<nn::InstanceNorm2d> in1_, in2_;        // no-latent ablation
};

class ResnetEncoder : public nn::Module {
public:
    explicit ResnetEncoder(const GeneratorConfig& cfg);
    // returns final map; fills skips (block outputs, high res first)
    nn::Var forward(const nn::Var& x, std::vector<nn::Var>* skips);

private:
    std::vector<std::unique_ptr<DownBlock>> blocks_;
};

}  // namespace detail

class Generator : public nn::Module {
public:
    explicit Generator(GeneratorConfig cfg);

    const GeneratorConfig& config() const { return cfg_; }

    StyleBundle encode_style(const nn::Var& style_images);
    ContentFeature encode_content(const nn::Var& content_images);
    nn::Var mix(const nn::Var& x_s, const nn::Var& x_c, const std::vector<nn::Var>& skips,
                const nn::Var& f_s);
    nn::Var generate(const nn::Var& style_images, const nn::Var& content_images);

private:
    GeneratorConfig cfg_;
    detail::ResnetEncoder style_enc_, content_enc_;
    nn::Linear map1_, map2_, map3_;  // mapping network f (3-layer MLP on GAP(X_s))
    std::vector<std::unique_ptr<detail::UpBlock>> up_blocks_;
    nn::InstanceNorm2d out_norm_;
    nn::Conv2d out_conv_;
};

}  // namespace glyphsynth
