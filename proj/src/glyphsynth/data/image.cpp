#include "glyphsynth/data/image.hpp"

#include <cmath>

#include "glyphsynth/common.hpp"

namespace glyphsynth {

GlyphImage::GlyphImage(nn::Tensor t) : pixels(std::move(t)) { validate(); }

void GlyphImage::validate() const {
    check(pixels.ndim() == 3 && pixels.size(0) == 3, "GlyphImage: expected [3,H,W]");
    check(pixels.size(1) >= 1 && pixels.size(2) >= 1, "GlyphImage: empty spatial dims");
    for (const double v : pixels)
        check(v >= -1.0 && v <= 1.0 && std::isfinite(v), "GlyphImage: value outside [-1,1]");
}

GlyphImage image_from_rgb8(const Rgb8Image& rgb) {
    nn::Tensor t({3, rgb.height, rgb.width});
    const int hw = rgb.height * rgb.width;
    for (int i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c)
            t[c * hw + i] = static_cast<double>(rgb.pixels[static_cast<size_t>(i) * 3 + c]) /
                                255.0 * 2.0 -
                            1.0;
    return GlyphImage(std::move(t));
}

Rgb8Image image_to_rgb8(const nn::Tensor& pixels) {
    check(pixels.ndim() == 3 && pixels.size(0) == 3, "image_to_rgb8: expected [3,H,W]");
    Rgb8Image out;
    out.height = static_cast<int>(pixels.size(1));
    out.width = static_cast<int>(pixels.size(2));
    const int hw = out.height * out.width;
    out.pixels.resize(static_cast<size_t>(hw) * 3);
    for (int i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp((pixels[c * hw + i] + 1.0) * 0.5, 0.0, 1.0);
            out.pixels[static_cast<size_t>(i) * 3 + c] =
                static_cast<uint8_t>(std::lround(v * 255.0));
        }
    return out;
}

nn::Tensor stack_images(const std::vector<nn::Tensor>& images) {
    check(!images.empty(), "stack_images: empty batch");
    const int64_t C = images[0].size(0), H = images[0].size(1), W = images[0].size(2);
    nn::Tensor out({static_cast<int64_t>(images.size()), C, H, W});
    const int64_t chw = C * H * W;
    for (size_t n = 0; n < images.size(); ++n) {
        check(images[n].numel() == chw, "stack_images: inconsistent shapes");
        std::copy(images[n].begin(), images[n].end(), out.data() + static_cast<int64_t>(n) * chw);
    }
    return out;
}

}  // namespace glyphsynth
