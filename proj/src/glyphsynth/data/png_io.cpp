#include "glyphsynth/data/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "glyphsynth/common.hpp"

namespace glyphsynth {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png_rgb8(const std::string& path, const Rgb8Image& img) {
    check(img.width > 0 && img.height > 0, "write_png: empty image");
    check(static_cast<size_t>(img.width) * img.height * 3 == img.pixels.size(),
          "write_png: pixel buffer size mismatch");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail("write_png: cannot open %s", path.c_str());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png != nullptr, "write_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("write_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("write_png: libpng error writing %s", path.c_str());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() +
                                                 static_cast<size_t>(y) * img.width * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Rgb8Image read_png_rgb8(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail("read_png: cannot open %s", path.c_str());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png != nullptr, "read_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("read_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("read_png: libpng error reading %s", path.c_str());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize any input to 8-bit RGB.
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    Rgb8Image out;
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.pixels.resize(static_cast<size_t>(out.width) * out.height * 3);
    check(png_get_rowbytes(png, info) == static_cast<size_t>(out.width) * 3,
          "read_png: unexpected row size");
    for (int y = 0; y < out.height; ++y)
        png_read_row(png, out.pixels.data() + static_cast<size_t>(y) * out.width * 3, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace glyphsynth
