#pragma once

#include <string>
#include <vector>

#include "glyphsynth/data/png_io.hpp"
#include "glyphsynth/nn/tensor.hpp"

namespace glyphsynth {

// One comparison row; cells are [3,S,S] images (typically style ref, content
// ref, generated, and optionally the target). Rows may have ragged lengths —
// missing cells render as blank.
struct GridRow {
    std::vector<nn::Tensor> cells;
};

void save_grid_png(const std::vector<GridRow>& rows, const std::string& path,
                   int separator = 2);

// Attention panels: the input glyph followed by one heat-blended panel per
// decoding step, each captioned (e.g. with the predicted component symbol).
// alphas are row-major h x w attention maps.
void save_attention_overlay(const nn::Tensor& image, const std::vector<nn::Tensor>& alphas,
                            const std::vector<std::string>& captions, int grid_h, int grid_w,
                            const std::string& path);

// Pixel location of the maximum of an upsampled heat panel (test support).
std::pair<int, int> heat_argmax_pixel(const nn::Tensor& alpha, int grid_h, int grid_w,
                                      int img_size);

}  // namespace glyphsynth
