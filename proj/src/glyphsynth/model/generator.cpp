#include "glyphsynth/model/generator.hpp"

#include <algorithm>

namespace glyphsynth {

using namespace nn;

int GeneratorConfig::enc_channels(int block) const {
    return std::min(ch << block, 8 * ch);
}

int GeneratorConfig::bottleneck_size() const { return img_size >> n_blocks; }

void GeneratorConfig::validate() const {
    check(n_blocks >= 1 && n_blocks <= 8, "GeneratorConfig: n_blocks out of range");
    check(img_size % (1 << n_blocks) == 0 && bottleneck_size() >= 1,
          "GeneratorConfig: img_size must be divisible by 2^n_blocks");
    check(ch >= 1 && d_s >= 1, "GeneratorConfig: ch and d_s must be positive");
}

Var adain(const Var& x, const Var& scale, const Var& bias) {
    return add_nc(mul_nc(instance_norm(x, 1e-5), scale), bias);
}

namespace detail {

DownBlock::DownBlock(int64_t in_ch, int64_t out_ch)
    : in1_(in_ch), in2_(out_ch),
      conv1_(in_ch, out_ch, 3, 1, 1), conv2_(out_ch, out_ch, 3, 1, 1) {
    reg_child("in1", &in1_);
    reg_child("conv1", &conv1_);
    reg_child("in2", &in2_);
    reg_child("conv2", &conv2_);
    if (in_ch != out_ch) {
        shortcut_ = std::make_unique<Conv2d>(in_ch, out_ch, 1, 1, 0, /*bias=*/false);
        reg_child("shortcut", shortcut_.get());
    }
}

Var DownBlock::forward(const Var& x) {
    Var h = conv1_.forward(relu(in1_.forward(x)));
    h = conv2_.forward(relu(in2_.forward(h)));
    h = avgpool2(h);
    Var s = avgpool2(x);
    if (shortcut_) s = shortcut_->forward(s);
    return add(h, s);
}

UpBlock::UpBlock(int64_t in_ch, int64_t out_ch, int64_t d_s, bool use_style_latent)
    : in_ch_(in_ch), out_ch_(out_ch), use_style_latent_(use_style_latent),
      conv1_(in_ch, out_ch, 3, 1, 1), conv2_(out_ch, out_ch, 3, 1, 1),
      shortcut_(in_ch, out_ch, 1, 1, 0, /*bias=*/false) {
    reg_child("conv1", &conv1_);
    reg_child("conv2", &conv2_);
    reg_child("shortcut", &shortcut_);
    if (use_style_latent_) {
        affine1_ = std::make_unique<Linear>(d_s, 2 * in_ch);
        affine2_ = std::make_unique<Linear>(d_s, 2 * out_ch);
        reg_child("affine1", affine1_.get());
        reg_child("affine2", affine2_.get());
    } else {
        in1_ = std::make_unique<InstanceNorm2d>(in_ch);
        in2_ = std::make_unique<InstanceNorm2d>(out_ch);
        reg_child("in1", in1_.get());
        reg_child("in2", in2_.get());
    }
}

Var UpBlock::normalize(const Var& x, const Var& f_s, int site) {
    if (!use_style_latent_) return (site == 0 ? in1_ : in2_)->forward(x);
    const int64_t C = site == 0 ? in_ch_ : out_ch_;
    Var ab = (site == 0 ? affine1_ : affine2_)->forward(f_s);  // [N, 2C]
    // scale parameterized as 1 + offset so a small init starts near identity
    Var scale = add_scalar(slice_cols(ab, 0, C), 1.0);
    Var bias = slice_cols(ab, C, 2 * C);
    return adain(x, scale, bias);
}

Var UpBlock::forward(const Var& x, const Var& f_s) {
    Var h = upsample2(relu(normalize(x, f_s, 0)));
    h = conv1_.forward(h);
    h = conv2_.forward(relu(normalize(h, f_s, 1)));
    return add(h, shortcut_.forward(upsample2(x)));
}

ResnetEncoder::ResnetEncoder(const GeneratorConfig& cfg) {
    int64_t in_ch = 3;
    for (int b = 0; b < cfg.n_blocks; ++b) {
        const int64_t out_ch = cfg.enc_channels(b);
        blocks_.push_back(std::make_unique<DownBlock>(in_ch, out_ch));
        reg_child("block" + std::to_string(b + 1), blocks_.back().get());
        in_ch = out_ch;
    }
}

Var ResnetEncoder::forward(const Var& x, std::vector<Var>* skips) {
    Var h = x;
    for (auto& block : blocks_) {
        h = block->forward(h);
        if (skips) skips->push_back(h);
    }
    return h;
}

}  // namespace detail

Generator::Generator(GeneratorConfig cfg)
    : cfg_((cfg.validate(), cfg)),
      style_enc_(cfg_), content_enc_(cfg_),
      map1_(cfg_.enc_channels(cfg_.n_blocks - 1), cfg_.d_s),
      map2_(cfg_.d_s, cfg_.d_s), map3_(cfg_.d_s, cfg_.d_s),
      out_norm_(cfg_.ch), out_conv_(cfg_.ch, 3, 3, 1, 1) {
    reg_child("style_enc", &style_enc_);
    reg_child("content_enc", &content_enc_);
    reg_child("map1", &map1_);
    reg_child("map2", &map2_);
    reg_child("map3", &map3_);

    // Mixer: input concat[X_s; X_c]; each up block also receives the content
    // skip at its input resolution.
    const int n = cfg_.n_blocks;
    int64_t carried = 2 * cfg_.enc_channels(n - 1);
    for (int b = 0; b < n; ++b) {
        const int64_t skip_ch = cfg_.enc_channels(n - 1 - b);
        // mirror of the encoder ladder; the last block keeps ch channels
        const int64_t out_ch = b + 1 < n ? cfg_.enc_channels(n - 2 - b) : cfg_.ch;
        up_blocks_.push_back(std::make_unique<detail::UpBlock>(carried + skip_ch, out_ch,
                                                               cfg_.d_s, cfg_.use_style_latent));
        reg_child("up" + std::to_string(b + 1), up_blocks_.back().get());
        carried = out_ch;
    }
    reg_child("out_norm", &out_norm_);
    reg_child("out_conv", &out_conv_);
}

StyleBundle Generator::encode_style(const Var& style_images) {
    check(style_images.val().ndim() == 4 && style_images.val().size(1) == 3 &&
              style_images.val().size(2) == cfg_.img_size &&
              style_images.val().size(3) == cfg_.img_size,
          "encode_style: expected [N,3," + std::to_string(cfg_.img_size) + "," +
              std::to_string(cfg_.img_size) + "], got " + nn::shape_str(style_images.shape()));
    StyleBundle out;
    out.feature_map = style_enc_.forward(style_images, nullptr);
    Var pooled = global_avg_pool(out.feature_map);
    out.latent = map3_.forward(relu(map2_.forward(relu(map1_.forward(pooled)))));
    return out;
}

ContentFeature Generator::encode_content(const Var& content_images) {
    check(content_images.val().ndim() == 4 && content_images.val().size(1) == 3 &&
              content_images.val().size(2) == cfg_.img_size &&
              content_images.val().size(3) == cfg_.img_size,
          "encode_content: expected [N,3," + std::to_string(cfg_.img_size) + "," +
              std::to_string(cfg_.img_size) + "], got " + nn::shape_str(content_images.shape()));
    ContentFeature out;
    out.feature_map = content_enc_.forward(content_images, &out.skips);
    return out;
}

Var Generator::mix(const Var& x_s, const Var& x_c, const std::vector<Var>& skips,
                   const Var& f_s) {
    check(x_s.val().same_shape(x_c.val()), "mix: X_s and X_c must be spatially aligned");
    check(static_cast<int>(skips.size()) == cfg_.n_blocks,
          "mix: expected one skip per down block");
    Var h = concat_channels({x_s, x_c});
    for (int b = 0; b < cfg_.n_blocks; ++b) {
        const Var& skip = skips[static_cast<size_t>(cfg_.n_blocks - 1 - b)];
        check(skip.val().size(2) == h.val().size(2) && skip.val().size(3) == h.val().size(3),
              "mix: skip resolution mismatch at block " + std::to_string(b + 1));
        h = up_blocks_[static_cast<size_t>(b)]->forward(concat_channels({h, skip}), f_s);
    }
    return tanh_op(out_conv_.forward(relu(out_norm_.forward(h))));
}

Var Generator::generate(const Var& style_images, const Var& content_images) {
    StyleBundle style = encode_style(style_images);
    ContentFeature content = encode_content(content_images);
    return mix(style.feature_map, content.feature_map, content.skips, style.latent);
}

}  // namespace glyphsynth
