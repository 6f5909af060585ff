#include "glyphsynth/model/discriminator.hpp"

#include <algorithm>

namespace glyphsynth {

using namespace nn;

namespace {
constexpr double kSlope = 0.2;
}

int DiscConfig::enc_channels(int block) const { return std::min(ch << block, 8 * ch); }

void DiscConfig::validate() const {
    check(n_blocks >= 1 && img_size % (1 << n_blocks) == 0 && (img_size >> n_blocks) >= 1,
          "DiscConfig: img_size must be divisible by 2^n_blocks");
    check(ch >= 1, "DiscConfig: ch must be positive");
}

class UnetDiscriminator::DownBlock : public Module {
public:
    DownBlock(int64_t in_ch, int64_t out_ch)
        : conv1_(in_ch, out_ch, 3, 1, 1), conv2_(out_ch, out_ch, 3, 1, 1) {
        reg_child("conv1", &conv1_);
        reg_child("conv2", &conv2_);
        if (in_ch != out_ch) {
            shortcut_ = std::make_unique<Conv2d>(in_ch, out_ch, 1, 1, 0, false);
            reg_child("shortcut", shortcut_.get());
        }
    }

    Var forward(const Var& x) {
        Var h = conv1_.forward(lrelu(x, kSlope));
        h = avgpool2(conv2_.forward(lrelu(h, kSlope)));
        Var s = avgpool2(x);
        if (shortcut_) s = shortcut_->forward(s);
        return add(h, s);
    }

private:
    Conv2d conv1_, conv2_;
    std::unique_ptr<Conv2d> shortcut_;
};

class UnetDiscriminator::UpBlock : public Module {
public:
    UpBlock(int64_t in_ch, int64_t out_ch)
        : conv1_(in_ch, out_ch, 3, 1, 1), conv2_(out_ch, out_ch, 3, 1, 1),
          shortcut_(in_ch, out_ch, 1, 1, 0, false) {
        reg_child("conv1", &conv1_);
        reg_child("conv2", &conv2_);
        reg_child("shortcut", &shortcut_);
    }

    Var forward(const Var& x) {
        Var up = upsample2(x);
        Var h = conv1_.forward(lrelu(up, kSlope));
        h = conv2_.forward(lrelu(h, kSlope));
        return add(h, shortcut_.forward(up));
    }

private:
    Conv2d conv1_, conv2_, shortcut_;
};

UnetDiscriminator::UnetDiscriminator(DiscConfig cfg)
    : cfg_((cfg.validate(), cfg)),
      enc_head_(cfg_.enc_channels(cfg_.n_blocks - 1), 1) {
    int64_t in_ch = 3;
    for (int b = 0; b < cfg_.n_blocks; ++b) {
        down_.push_back(std::make_unique<DownBlock>(in_ch, cfg_.enc_channels(b)));
        reg_child("down" + std::to_string(b + 1), down_.back().get());
        in_ch = cfg_.enc_channels(b);
    }
    reg_child("enc_head", &enc_head_);
    if (cfg_.use_dec_head) {
        // decoder ladder mirrors the encoder; block k consumes the previous
        // decoder output concatenated with the same-resolution encoder skip
        int64_t carried = cfg_.enc_channels(cfg_.n_blocks - 1);
        for (int b = 0; b < cfg_.n_blocks; ++b) {
            const int64_t out_ch =
                b + 1 < cfg_.n_blocks ? cfg_.enc_channels(cfg_.n_blocks - 2 - b) : cfg_.ch;
            const int64_t skip_ch =
                b == 0 ? 0 : cfg_.enc_channels(cfg_.n_blocks - 1 - b);
            up_.push_back(std::make_unique<UpBlock>(carried + skip_ch, out_ch));
            reg_child("up" + std::to_string(b + 1), up_.back().get());
            carried = out_ch;
        }
        dec_out_ = std::make_unique<Conv2d>(cfg_.ch, 1, 3, 1, 1);
        reg_child("dec_out", dec_out_.get());
    }
}

UnetDiscriminator::~UnetDiscriminator() = default;

DiscOutputs UnetDiscriminator::discriminate(const Var& images, bool zero_skips) {
    check(images.val().ndim() == 4 && images.val().size(1) == 3 &&
              images.val().size(2) == cfg_.img_size && images.val().size(3) == cfg_.img_size,
          "discriminate: expected [N,3," + std::to_string(cfg_.img_size) + "," +
              std::to_string(cfg_.img_size) + "], got " + shape_str(images.shape()));
    std::vector<Var> skips;
    Var h = images;
    for (auto& block : down_) {
        h = block->forward(h);
        skips.push_back(h);
    }
    DiscOutputs out;
    out.enc_logit = reshape(enc_head_.forward(global_avg_pool(lrelu(h, kSlope))),
                            {images.val().size(0)});
    if (cfg_.use_dec_head) {
        Var u = h;
        for (int b = 0; b < cfg_.n_blocks; ++b) {
            if (b > 0) {
                Var skip = skips[static_cast<size_t>(cfg_.n_blocks - 1 - b)];
                if (zero_skips) skip = Var::constant(Tensor::zeros(skip.shape()));
                u = concat_channels({u, skip});
            }
            u = up_[static_cast<size_t>(b)]->forward(u);
        }
        out.dec_logit_map = dec_out_->forward(lrelu(u, kSlope));
    }
    return out;
}

}  // namespace glyphsynth
