#include "glyphsynth/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "glyphsynth/data/png_io.hpp"

namespace glyphsynth {

namespace fs = std::filesystem;

namespace {

struct Seg {
    double x0, y0, x1, y1;
};

// Tiny vector-font primitives in unit cell coordinates. Shapes are chosen to
// stay mutually distinguishable after heavy downscaling.
const std::vector<std::vector<Seg>>& primitive_table() {
    static const std::vector<std::vector<Seg>> table = {
        /* 0 hbar */ {{0.10, 0.50, 0.90, 0.50}},
        /* 1 vbar */ {{0.50, 0.10, 0.50, 0.90}},
        /* 2 X    */ {{0.12, 0.12, 0.88, 0.88}, {0.88, 0.12, 0.12, 0.88}},
        /* 3 box  */
        {{0.15, 0.15, 0.85, 0.15}, {0.85, 0.15, 0.85, 0.85}, {0.85, 0.85, 0.15, 0.85},
         {0.15, 0.85, 0.15, 0.15}},
        /* 4 L    */ {{0.20, 0.10, 0.20, 0.88}, {0.20, 0.88, 0.88, 0.88}},
        /* 5 T    */ {{0.10, 0.14, 0.90, 0.14}, {0.50, 0.14, 0.50, 0.90}},
        /* 6 U    */
        {{0.16, 0.10, 0.16, 0.86}, {0.16, 0.86, 0.84, 0.86}, {0.84, 0.86, 0.84, 0.10}},
        /* 7 Z    */
        {{0.12, 0.14, 0.88, 0.14}, {0.88, 0.14, 0.12, 0.86}, {0.12, 0.86, 0.88, 0.86}},
        /* 8 plus */ {{0.50, 0.10, 0.50, 0.90}, {0.10, 0.50, 0.90, 0.50}},
        /* 9 diag */ {{0.12, 0.88, 0.88, 0.12}},
        /* 10 seven */ {{0.10, 0.12, 0.90, 0.12}, {0.90, 0.12, 0.38, 0.90}},
        /* 11 N   */
        {{0.16, 0.90, 0.16, 0.10}, {0.16, 0.10, 0.84, 0.90}, {0.84, 0.90, 0.84, 0.10}},
        /* 12 C   */
        {{0.86, 0.16, 0.18, 0.16}, {0.18, 0.16, 0.18, 0.84}, {0.18, 0.84, 0.86, 0.84}},
        /* 13 F   */
        {{0.20, 0.90, 0.20, 0.12}, {0.20, 0.12, 0.88, 0.12}, {0.20, 0.50, 0.76, 0.50}},
        /* 14 Y   */
        {{0.12, 0.10, 0.50, 0.48}, {0.88, 0.10, 0.50, 0.48}, {0.50, 0.48, 0.50, 0.90}},
        /* 15 E   */
        {{0.20, 0.90, 0.20, 0.10}, {0.20, 0.10, 0.86, 0.10}, {0.20, 0.50, 0.78, 0.50},
         {0.20, 0.90, 0.86, 0.90}},
        /* 16 V   */ {{0.12, 0.10, 0.50, 0.90}, {0.88, 0.10, 0.50, 0.90}},
        /* 17 W   */
        {{0.10, 0.10, 0.30, 0.90}, {0.30, 0.90, 0.50, 0.35}, {0.50, 0.35, 0.70, 0.90},
         {0.70, 0.90, 0.90, 0.10}},
        /* 18 M   */
        {{0.14, 0.90, 0.14, 0.10}, {0.14, 0.10, 0.50, 0.60}, {0.50, 0.60, 0.86, 0.10},
         {0.86, 0.10, 0.86, 0.90}},
        /* 19 S   */
        {{0.86, 0.12, 0.18, 0.12}, {0.18, 0.12, 0.18, 0.50}, {0.18, 0.50, 0.84, 0.50},
         {0.84, 0.50, 0.84, 0.88}, {0.84, 0.88, 0.14, 0.88}},
    };
    return table;
}

}  // namespace

int synthetic_primitive_count_limit() {
    return static_cast<int>(primitive_table().size());
}

std::vector<Rect> layout_slots(LayoutKind kind) {
    // Every layout's first reading-order slot contains the canvas point
    // (0.3, 0.3); the decoder's step-1 attention map cannot depend on the
    // image, so first components must share a feasible region.
    switch (kind) {
        case LayoutKind::Single:
            return {{0.12, 0.12, 0.88, 0.88}};
        case LayoutKind::LeftRight:
            return {{0.06, 0.15, 0.48, 0.85}, {0.52, 0.15, 0.94, 0.85}};
        case LayoutKind::TopBottom:
            return {{0.15, 0.06, 0.85, 0.48}, {0.15, 0.52, 0.85, 0.94}};
        case LayoutKind::LeftPair:
            return {{0.06, 0.12, 0.46, 0.88}, {0.54, 0.06, 0.94, 0.46}, {0.54, 0.54, 0.94, 0.94}};
        case LayoutKind::Quad:
            return {{0.06, 0.06, 0.47, 0.47},
                    {0.53, 0.06, 0.94, 0.47},
                    {0.06, 0.53, 0.47, 0.94},
                    {0.53, 0.53, 0.94, 0.94}};
    }
    fail("layout_slots: bad layout kind");
}

SyntheticStyleParams synthetic_style_params(uint64_t corpus_seed, int style_id) {
    // Stratified bins, then seeded jitter. 3 widths x 3 slants x 2 textures.
    static const double kWidths[3] = {0.050, 0.080, 0.115};
    static const double kSlants[3] = {-0.20, 0.0, 0.20};
    const int cell = style_id % 18;
    SyntheticStyleParams p;
    Rng rng = Rng::derive(corpus_seed, 0xA11CE000ULL + static_cast<uint64_t>(style_id));
    p.stroke_width = kWidths[cell % 3] + rng.uniform(-0.006, 0.006);
    p.slant = kSlants[(cell / 3) % 3] + rng.uniform(-0.03, 0.03);
    p.fill_texture = (cell / 9) % 2;
    p.corner_radius = (style_id % 2 == 0) ? rng.uniform(0.0, 0.25) : rng.uniform(0.75, 1.0);
    p.scale_jitter = rng.uniform(0.02, 0.07);
    return p;
}

namespace {

double seg_distance_blend(double px, double py, const Seg& s, double roundness) {
    const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - s.x0) * vx + (py - s.y0) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = s.x0 + t * vx, cy = s.y0 + t * vy;
    const double dx = std::fabs(px - cx), dy = std::fabs(py - cy);
    const double euclid = std::hypot(dx, dy);
    const double cheby = std::max(dx, dy);
    // roundness blends square caps/joints (Chebyshev) into round ones.
    return roundness * euclid + (1.0 - roundness) * cheby;
}

struct GlyphGeometry {
    // Sheared, slot-mapped segments in pixel coordinates, per component.
    std::vector<std::vector<Seg>> segs;
};

GlyphGeometry glyph_geometry(const SyntheticChar& ch, const SyntheticStyleParams& style, int size,
                             uint64_t corpus_seed, int style_id, int char_id) {
    const auto slots = layout_slots(ch.layout);
    check(slots.size() == ch.primitives.size(), "synthetic char: slot/primitive count mismatch");
    const double S = static_cast<double>(size);
    const double shear = std::tan(style.slant);
    GlyphGeometry geo;
    Rng jitter = Rng::derive(corpus_seed, 0xBEEF0000ULL + static_cast<uint64_t>(style_id) * 131071u +
                                              static_cast<uint64_t>(char_id));
    for (size_t k = 0; k < slots.size(); ++k) {
        const Rect& r = slots[k];
        const double scale = 1.0 - style.scale_jitter * jitter.uniform();
        const double cx = 0.5 * (r.x0 + r.x1), cy = 0.5 * (r.y0 + r.y1);
        const double w = (r.x1 - r.x0) * scale, h = (r.y1 - r.y0) * scale;
        std::vector<Seg> out;
        for (const Seg& s : primitive_table()[static_cast<size_t>(ch.primitives[k])]) {
            auto map_pt = [&](double ux, double uy) {
                double x = cx + (ux - 0.5) * w;
                double y = cy + (uy - 0.5) * h;
                // shear around the canvas mid-line, then to pixels
                x += shear * (y - 0.5);
                return std::pair<double, double>{x * S, y * S};
            };
            auto [x0, y0] = map_pt(s.x0, s.y0);
            auto [x1, y1] = map_pt(s.x1, s.y1);
            out.push_back(Seg{x0, y0, x1, y1});
        }
        geo.segs.push_back(std::move(out));
    }
    return geo;
}

}  // namespace

GlyphImage render_synthetic_glyph(const SyntheticChar& ch, const SyntheticStyleParams& style,
                                  int size, uint64_t corpus_seed, int style_id, int char_id) {
    check(size >= 8, "render_synthetic_glyph: size too small");
    const GlyphGeometry geo = glyph_geometry(ch, style, size, corpus_seed, style_id, char_id);
    const double half_w = 0.5 * style.stroke_width * size;
    std::vector<double> ink(static_cast<size_t>(size) * size, 0.0);

    for (const auto& segs : geo.segs) {
        for (const Seg& s : segs) {
            const int x0 = std::max(0, static_cast<int>(std::floor(std::min(s.x0, s.x1) - half_w - 1)));
            const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(s.x0, s.x1) + half_w + 1)));
            const int y0 = std::max(0, static_cast<int>(std::floor(std::min(s.y0, s.y1) - half_w - 1)));
            const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(s.y0, s.y1) + half_w + 1)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double d = seg_distance_blend(x + 0.5, y + 0.5, s, style.corner_radius);
                    // one-pixel anti-aliasing ramp
                    const double cov = std::clamp(half_w - d + 0.5, 0.0, 1.0);
                    double& cell = ink[static_cast<size_t>(y) * size + x];
                    cell = std::max(cell, cov);
                }
        }
    }

    if (style.fill_texture == 1) {
        // hatching: every third scanline is thinned
        for (int y = 0; y < size; ++y)
            if (y % 3 == 1)
                for (int x = 0; x < size; ++x) ink[static_cast<size_t>(y) * size + x] *= 0.35;
    }

    nn::Tensor t({3, size, size});
    const int hw = size * size;
    for (int i = 0; i < hw; ++i) {
        const double v = 1.0 - 2.0 * std::clamp(ink[static_cast<size_t>(i)], 0.0, 1.0);
        t[0 * hw + i] = v;
        t[1 * hw + i] = v;
        t[2 * hw + i] = v;
    }
    return GlyphImage(std::move(t));
}

std::vector<Rect> synthetic_component_boxes(const SyntheticChar& ch,
                                            const SyntheticStyleParams& style, int size) {
    const auto slots = layout_slots(ch.layout);
    const double S = static_cast<double>(size);
    const double shear = std::tan(style.slant);
    const double pad = 0.5 * style.stroke_width * size + 1.0;
    std::vector<Rect> out;
    for (const Rect& r : slots) {
        double xmin = 1e300, xmax = -1e300;
        for (double uy : {r.y0, r.y1})
            for (double ux : {r.x0, r.x1}) {
                const double x = ux + shear * (uy - 0.5);
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
            }
        out.push_back(Rect{std::clamp(xmin * S - pad, 0.0, S), std::clamp(r.y0 * S - pad, 0.0, S),
                           std::clamp(xmax * S + pad, 0.0, S), std::clamp(r.y1 * S + pad, 0.0, S)});
    }
    return out;
}

namespace {

std::string char_key(const SyntheticChar& ch) {
    std::string k = std::to_string(static_cast<int>(ch.layout)) + ":";
    for (int p : ch.primitives) k += std::to_string(p) + ",";
    return k;
}

}  // namespace

std::vector<SyntheticChar> synthetic_characters(const SyntheticCorpusSpec& spec) {
    check(spec.n_primitives >= 4, "make_synthetic_corpus: n_primitives must be >= 4");
    check(spec.n_primitives <= synthetic_primitive_count_limit(),
          "make_synthetic_corpus: n_primitives exceeds the primitive table");
    check(spec.n_chars >= 1, "make_synthetic_corpus: n_chars must be >= 1");

    // Total distinct characters: P + 2P^2 + P^3 + P^4 over the five layouts.
    const double P = spec.n_primitives;
    const double space = P + 2 * P * P + P * P * P + P * P * P * P;
    if (static_cast<double>(spec.n_chars) > space)
        fail("make_synthetic_corpus: %d characters requested but only %.0f distinct "
             "combinations exist",
             spec.n_chars, space);

    Rng rng = Rng::derive(spec.seed, 0xC0FFEEULL);
    std::vector<SyntheticChar> chars;
    std::set<std::string> seen;
    int attempts = 0;
    const int max_attempts = spec.n_chars * 1000 + 10000;
    while (static_cast<int>(chars.size()) < spec.n_chars) {
        if (++attempts > max_attempts)
            fail("make_synthetic_corpus: could not draw %d unique characters", spec.n_chars);
        const int t = 1 + rng.index(4);
        SyntheticChar ch;
        switch (t) {
            case 1: ch.layout = LayoutKind::Single; break;
            case 2: ch.layout = rng.bernoulli(0.5) ? LayoutKind::LeftRight : LayoutKind::TopBottom; break;
            case 3: ch.layout = LayoutKind::LeftPair; break;
            default: ch.layout = LayoutKind::Quad; break;
        }
        for (int k = 0; k < t; ++k) ch.primitives.push_back(rng.index(spec.n_primitives));
        if (seen.insert(char_key(ch)).second) chars.push_back(std::move(ch));
    }
    return chars;
}

void make_synthetic_corpus(const SyntheticCorpusSpec& spec, const std::string& out_dir) {
    check(spec.n_styles >= 1, "make_synthetic_corpus: n_styles must be >= 1");
    check(spec.img_size >= 16, "make_synthetic_corpus: img_size must be >= 16");
    const std::vector<SyntheticChar> chars = synthetic_characters(spec);

    const fs::path root(out_dir);
    fs::create_directories(root / "meta");

    // vocab: primitive ids are the component ids
    std::vector<std::string> symbols;
    for (int p = 0; p < spec.n_primitives; ++p) symbols.push_back("p" + std::to_string(p));
    ComponentVocab vocab(symbols);
    vocab.save((root / "meta" / "vocab.txt").string());

    DecompositionTable table;
    for (size_t c = 0; c < chars.size(); ++c)
        table.add("c" + std::to_string(c), ComponentSequence{chars[c].primitives});
    table.save((root / "meta" / "decomposition.tsv").string(), vocab);

    std::ofstream styles_out(root / "meta" / "styles.tsv");
    std::ofstream records_out(root / "meta" / "records.tsv");
    std::ofstream boxes_out(root / "meta" / "boxes.tsv");
    check(styles_out && records_out && boxes_out, "make_synthetic_corpus: cannot write meta files");
    styles_out << "style_id\tstroke_width\tslant\tcorner_radius\tscale_jitter\tfill_texture\n";
    records_out << "style_id\tchar_id\tpath\n";
    boxes_out << "style_id\tchar_id\tt\tx0\ty0\tx1\ty1\n";

    char buf[256];
    for (int s = 0; s < spec.n_styles; ++s) {
        const SyntheticStyleParams sp = synthetic_style_params(spec.seed, s);
        std::snprintf(buf, sizeof(buf), "%d\t%.9f\t%.9f\t%.9f\t%.9f\t%d\n", s, sp.stroke_width,
                      sp.slant, sp.corner_radius, sp.scale_jitter, sp.fill_texture);
        styles_out << buf;
        fs::create_directories(root / "images" / std::to_string(s));
        for (size_t c = 0; c < chars.size(); ++c) {
            const GlyphImage img = render_synthetic_glyph(chars[c], sp, spec.img_size, spec.seed,
                                                          s, static_cast<int>(c));
            const std::string rel =
                "images/" + std::to_string(s) + "/" + std::to_string(c) + ".png";
            write_png_rgb8((root / rel).string(), image_to_rgb8(img.pixels));
            records_out << s << '\t' << c << '\t' << rel << '\n';
            const auto boxes = synthetic_component_boxes(chars[c], sp, spec.img_size);
            for (size_t t = 0; t < boxes.size(); ++t) {
                std::snprintf(buf, sizeof(buf), "%d\t%zu\t%zu\t%.4f\t%.4f\t%.4f\t%.4f\n", s, c, t,
                              boxes[t].x0, boxes[t].y0, boxes[t].x1, boxes[t].y1);
                boxes_out << buf;
            }
        }
    }

    std::ofstream meta_out(root / "meta" / "corpus.json");
    meta_out << "{\n"
             << "  \"format_version\": 1,\n"
             << "  \"kind\": \"synthetic\",\n"
             << "  \"img_size\": " << spec.img_size << ",\n"
             << "  \"n_styles\": " << spec.n_styles << ",\n"
             << "  \"n_primitives\": " << spec.n_primitives << ",\n"
             << "  \"n_chars\": " << spec.n_chars << ",\n"
             << "  \"seed\": " << spec.seed << "\n"
             << "}\n";
}

}  // namespace glyphsynth
