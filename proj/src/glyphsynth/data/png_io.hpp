#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace glyphsynth {

struct Rgb8Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // row-major RGB triples
};

void write_png_rgb8(const std::string& path, const Rgb8Image& img);
Rgb8Image read_png_rgb8(const std::string& path);

}  // namespace glyphsynth
