#pragma once

#include "glyphsynth/data/png_io.hpp"
#include "glyphsynth/nn/tensor.hpp"

namespace glyphsynth {

// The unit every encoder and decoder trades in: a 3xHxW image with values
// clamped to [-1,1] (white background +1, ink -1).
struct GlyphImage {
    nn::Tensor pixels;  // [3,H,W]

    GlyphImage() = default;
    explicit GlyphImage(nn::Tensor t);

    int height() const { return static_cast<int>(pixels.size(1)); }
    int width() const { return static_cast<int>(pixels.size(2)); }

    // Throws unless shape is [3,H,W] and every value lies in [-1,1].
    void validate() const;
};

GlyphImage image_from_rgb8(const Rgb8Image& rgb);
Rgb8Image image_to_rgb8(const nn::Tensor& pixels);  // [3,H,W] -> bytes

// Stacks [3,H,W] images into an [N,3,H,W] batch tensor.
nn::Tensor stack_images(const std::vector<nn::Tensor>& images);

}  // namespace glyphsynth
