#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glyphsynth/data/image.hpp"

namespace glyphsynth {

// Minimal TrueType reader: cmap (formats 0/4/6/12), head, maxp, loca, glyf
// with simple and composite glyphs. Outlines come back as flattened closed
// contours in font units (y up).
class TtfFont {
public:
    struct Point {
        double x, y;
    };
    struct Outline {
        std::vector<std::vector<Point>> contours;
        double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
        bool empty() const { return contours.empty(); }
    };

    static TtfFont load(const std::string& path);

    bool has_codepoint(uint32_t cp) const;
    Outline glyph_outline(uint32_t cp) const;
    int units_per_em() const { return units_per_em_; }
    const std::string& path() const { return path_; }

private:
    uint16_t glyph_index(uint32_t cp) const;
    Outline outline_by_index(uint16_t gid, int depth) const;

    std::string path_;
    std::vector<uint8_t> data_;
    uint32_t glyf_off_ = 0, glyf_len_ = 0;
    std::vector<uint32_t> loca_;
    uint32_t cmap_sub_off_ = 0;  // offset of the selected cmap subtable
    uint16_t cmap_format_ = 0;
    int units_per_em_ = 1000;
    uint16_t num_glyphs_ = 0;
};

// Decodes exactly one UTF-8 character; errors on empty/multi-char strings.
uint32_t utf8_single_codepoint(const std::string& s);

// Rasterizes `utf8_char` centered on a white canvas, longest side fit to 90%.
// Errors when the font lacks the codepoint or the glyph is blank.
GlyphImage render_font_glyph(const TtfFont& font, const std::string& utf8_char, int size = 128);

}  // namespace glyphsynth
