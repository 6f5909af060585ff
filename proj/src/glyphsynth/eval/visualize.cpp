#include "glyphsynth/eval/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "glyphsynth/common.hpp"
#include "glyphsynth/data/image.hpp"

namespace glyphsynth {

namespace {

// 5x7 bitmap glyphs for caption strips (component symbols are short ASCII
// tokens like "p12" or "EOS").
struct MicroGlyph {
    char ch;
    uint8_t rows[7];  // low 5 bits used
};

const MicroGlyph kMicroFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1F}},
    {'3', {0x0E, 0x11, 0x01, 0x06, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'p', {0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10}},
    {'c', {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E}},
    {'s', {0x00, 0x00, 0x0F, 0x10, 0x0E, 0x01, 0x1E}},
    {'?', {0x0E, 0x11, 0x01, 0x06, 0x04, 0x00, 0x04}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const MicroGlyph* micro_glyph(char c) {
    for (const MicroGlyph& g : kMicroFont)
        if (g.ch == c) return &g;
    return nullptr;
}

void draw_text(Rgb8Image& img, int x0, int y0, const std::string& text) {
    int x = x0;
    for (char c : text) {
        const MicroGlyph* g = micro_glyph(c);
        if (!g) g = micro_glyph('?');
        for (int r = 0; r < 7; ++r)
            for (int b = 0; b < 5; ++b)
                if (g->rows[r] & (1 << (4 - b))) {
                    const int px = x + b, py = y0 + r;
                    if (px >= 0 && px < img.width && py >= 0 && py < img.height) {
                        const size_t idx = (static_cast<size_t>(py) * img.width + px) * 3;
                        img.pixels[idx] = img.pixels[idx + 1] = img.pixels[idx + 2] = 20;
                    }
                }
        x += 6;
    }
}

void blit(Rgb8Image& dst, const Rgb8Image& src, int x0, int y0) {
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            const int px = x0 + x, py = y0 + y;
            if (px < 0 || px >= dst.width || py < 0 || py >= dst.height) continue;
            for (int c = 0; c < 3; ++c)
                dst.pixels[(static_cast<size_t>(py) * dst.width + px) * 3 + c] =
                    src.pixels[(static_cast<size_t>(y) * src.width + x) * 3 + c];
        }
}

}  // namespace

void save_grid_png(const std::vector<GridRow>& rows, const std::string& path, int separator) {
    check(!rows.empty(), "save_grid_png: no rows");
    int cell = 0;
    size_t max_cols = 0;
    for (const GridRow& row : rows) {
        max_cols = std::max(max_cols, row.cells.size());
        for (const nn::Tensor& t : row.cells) {
            check(t.ndim() == 3 && t.size(0) == 3 && t.size(1) == t.size(2),
                  "save_grid_png: cells must be square [3,S,S]");
            if (cell == 0) cell = static_cast<int>(t.size(1));
            check(static_cast<int>(t.size(1)) == cell, "save_grid_png: mixed cell sizes");
        }
    }
    check(cell > 0 && max_cols > 0, "save_grid_png: empty rows");

    Rgb8Image canvas;
    canvas.width = static_cast<int>(max_cols) * cell + (static_cast<int>(max_cols) - 1) * separator;
    canvas.height =
        static_cast<int>(rows.size()) * cell + (static_cast<int>(rows.size()) - 1) * separator;
    canvas.pixels.assign(static_cast<size_t>(canvas.width) * canvas.height * 3, 255);

    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < rows[r].cells.size(); ++c)
            blit(canvas, image_to_rgb8(rows[r].cells[c]), static_cast<int>(c) * (cell + separator),
                 static_cast<int>(r) * (cell + separator));
    write_png_rgb8(path, canvas);
}

std::pair<int, int> heat_argmax_pixel(const nn::Tensor& alpha, int grid_h, int grid_w,
                                      int img_size) {
    check(alpha.numel() == static_cast<int64_t>(grid_h) * grid_w, "heat_argmax: size mismatch");
    int best = 0;
    for (int i = 1; i < grid_h * grid_w; ++i)
        if (alpha[i] > alpha[best]) best = i;
    const int cy = best / grid_w, cx = best % grid_w;
    // center pixel of the argmax cell after nearest upsampling
    return {cx * img_size / grid_w + img_size / (2 * grid_w),
            cy * img_size / grid_h + img_size / (2 * grid_h)};
}

void save_attention_overlay(const nn::Tensor& image, const std::vector<nn::Tensor>& alphas,
                            const std::vector<std::string>& captions, int grid_h, int grid_w,
                            const std::string& path) {
    check(image.ndim() == 3 && image.size(0) == 3, "attention_overlay: expected [3,S,S]");
    check(alphas.size() == captions.size(), "attention_overlay: captions/alphas mismatch");
    check(!alphas.empty(), "attention_overlay: no steps");
    const int S = static_cast<int>(image.size(1));
    const int caption_h = 10;
    const int sep = 1;
    const int panels = static_cast<int>(alphas.size()) + 1;

    Rgb8Image canvas;
    canvas.width = panels * S + (panels - 1) * sep;
    canvas.height = S + caption_h;
    canvas.pixels.assign(static_cast<size_t>(canvas.width) * canvas.height * 3, 255);

    Rgb8Image base = image_to_rgb8(image);
    blit(canvas, base, 0, 0);
    draw_text(canvas, 2, S + 1, "src");

    const int64_t hw = static_cast<int64_t>(S) * S;
    for (size_t t = 0; t < alphas.size(); ++t) {
        const nn::Tensor& alpha = alphas[t];
        check(alpha.numel() == static_cast<int64_t>(grid_h) * grid_w,
              "attention_overlay: alpha size mismatch");
        double amax = 0.0;
        for (int i = 0; i < grid_h * grid_w; ++i) amax = std::max(amax, alpha[i]);
        if (amax <= 0.0) amax = 1.0;

        Rgb8Image panel = base;
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x) {
                const int gy = y * grid_h / S, gx = x * grid_w / S;
                const double heat = alpha[gy * grid_w + gx] / amax;  // display-normalized
                const size_t idx = (static_cast<size_t>(y) * S + x) * 3;
                const double gray = (image[0 * hw + y * S + x] + 1.0) * 0.5;
                // red-tinted blend over the glyph
                panel.pixels[idx] = static_cast<uint8_t>(
                    std::lround(std::clamp(0.45 * gray + 0.55 * heat, 0.0, 1.0) * 255));
                panel.pixels[idx + 1] = static_cast<uint8_t>(
                    std::lround(std::clamp(0.45 * gray + 0.10 * heat, 0.0, 1.0) * 255));
                panel.pixels[idx + 2] = static_cast<uint8_t>(
                    std::lround(std::clamp(0.45 * gray, 0.0, 1.0) * 255));
            }
        const int x0 = (static_cast<int>(t) + 1) * (S + sep);
        blit(canvas, panel, x0, 0);
        draw_text(canvas, x0 + 2, S + 1, captions[t]);
    }
    write_png_rgb8(path, canvas);
}

}  // namespace glyphsynth
