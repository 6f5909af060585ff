#include "glyphsynth/data/ttf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "glyphsynth/common.hpp"

namespace glyphsynth {

namespace {

struct Reader {
    const uint8_t* p;
    size_t len;

    uint8_t u8(size_t off) const {
        check(off < len, "ttf: read out of bounds");
        return p[off];
    }
    uint16_t u16(size_t off) const {
        check(off + 2 <= len, "ttf: read out of bounds");
        return static_cast<uint16_t>((p[off] << 8) | p[off + 1]);
    }
    int16_t i16(size_t off) const { return static_cast<int16_t>(u16(off)); }
    uint32_t u32(size_t off) const {
        check(off + 4 <= len, "ttf: read out of bounds");
        return (static_cast<uint32_t>(p[off]) << 24) | (static_cast<uint32_t>(p[off + 1]) << 16) |
               (static_cast<uint32_t>(p[off + 2]) << 8) | p[off + 3];
    }
};

constexpr uint32_t tag(const char* s) {
    return (static_cast<uint32_t>(static_cast<uint8_t>(s[0])) << 24) |
           (static_cast<uint32_t>(static_cast<uint8_t>(s[1])) << 16) |
           (static_cast<uint32_t>(static_cast<uint8_t>(s[2])) << 8) |
           static_cast<uint32_t>(static_cast<uint8_t>(s[3]));
}

// Quadratic flattening with a fixed tolerance in font units.
void flatten_quad(std::vector<TtfFont::Point>& out, TtfFont::Point p0, TtfFont::Point c,
                  TtfFont::Point p1, double tol) {
    const double dev = std::hypot(p0.x - 2 * c.x + p1.x, p0.y - 2 * c.y + p1.y);
    int n = static_cast<int>(std::ceil(std::sqrt(dev / (4.0 * tol))));
    n = std::clamp(n, 1, 24);
    for (int i = 1; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        const double u = 1.0 - t;
        out.push_back({u * u * p0.x + 2 * u * t * c.x + t * t * p1.x,
                       u * u * p0.y + 2 * u * t * c.y + t * t * p1.y});
    }
}

}  // namespace

TtfFont TtfFont::load(const std::string& path) {
    TtfFont f;
    f.path_ = path;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail("ttf: cannot open %s", path.c_str());
        in.seekg(0, std::ios::end);
        const auto size = in.tellg();
        in.seekg(0);
        f.data_.resize(static_cast<size_t>(size));
        in.read(reinterpret_cast<char*>(f.data_.data()), size);
        check(static_cast<bool>(in), "ttf: short read on " + path);
    }
    Reader r{f.data_.data(), f.data_.size()};
    const uint32_t sfnt = r.u32(0);
    if (sfnt != 0x00010000u && sfnt != tag("true"))
        fail("ttf: %s is not a TrueType font (sfnt 0x%08x)", path.c_str(), sfnt);
    const uint16_t num_tables = r.u16(4);

    uint32_t head_off = 0, maxp_off = 0, loca_off = 0, loca_len = 0, cmap_off = 0;
    for (uint16_t i = 0; i < num_tables; ++i) {
        const size_t rec = 12 + static_cast<size_t>(i) * 16;
        const uint32_t t = r.u32(rec);
        const uint32_t off = r.u32(rec + 8);
        const uint32_t len = r.u32(rec + 12);
        if (t == tag("head")) head_off = off;
        else if (t == tag("maxp")) maxp_off = off;
        else if (t == tag("loca")) { loca_off = off; loca_len = len; }
        else if (t == tag("cmap")) cmap_off = off;
        else if (t == tag("glyf")) { f.glyf_off_ = off; f.glyf_len_ = len; }
    }
    check(head_off && maxp_off && loca_off && cmap_off && f.glyf_off_,
          "ttf: " + path + " misses a required table (head/maxp/loca/cmap/glyf)");

    f.units_per_em_ = r.u16(head_off + 18);
    const int16_t loc_fmt = r.i16(head_off + 50);
    f.num_glyphs_ = r.u16(maxp_off + 4);

    f.loca_.resize(f.num_glyphs_ + 1u);
    if (loc_fmt == 0) {
        check(loca_len >= (f.num_glyphs_ + 1u) * 2, "ttf: loca too short");
        for (uint32_t i = 0; i <= f.num_glyphs_; ++i)
            f.loca_[i] = static_cast<uint32_t>(r.u16(loca_off + i * 2)) * 2;
    } else {
        check(loca_len >= (f.num_glyphs_ + 1u) * 4, "ttf: loca too short");
        for (uint32_t i = 0; i <= f.num_glyphs_; ++i) f.loca_[i] = r.u32(loca_off + i * 4);
    }

    // Pick the best cmap subtable: (3,10) fmt12 > (3,1) fmt4 > (0,*) > first.
    const uint16_t n_enc = r.u16(cmap_off + 2);
    int best_score = -1;
    for (uint16_t i = 0; i < n_enc; ++i) {
        const size_t rec = cmap_off + 4 + static_cast<size_t>(i) * 8;
        const uint16_t plat = r.u16(rec);
        const uint16_t enc = r.u16(rec + 2);
        const uint32_t sub = cmap_off + r.u32(rec + 4);
        const uint16_t fmt = r.u16(sub);
        int score = 0;
        if (plat == 3 && enc == 10 && fmt == 12) score = 4;
        else if (plat == 3 && enc == 1 && fmt == 4) score = 3;
        else if (plat == 0 && (fmt == 4 || fmt == 12)) score = 2;
        else if (fmt == 4 || fmt == 12 || fmt == 6 || fmt == 0) score = 1;
        if (score > best_score) {
            best_score = score;
            f.cmap_sub_off_ = sub;
            f.cmap_format_ = fmt;
        }
    }
    check(best_score >= 0, "ttf: " + path + " has no usable cmap subtable");
    return f;
}

uint16_t TtfFont::glyph_index(uint32_t cp) const {
    Reader r{data_.data(), data_.size()};
    const uint32_t s = cmap_sub_off_;
    switch (cmap_format_) {
        case 0: {
            if (cp > 255) return 0;
            return r.u8(s + 6 + cp);
        }
        case 4: {
            if (cp > 0xFFFF) return 0;
            const uint16_t seg_x2 = r.u16(s + 6);
            const uint32_t end_base = s + 14;
            const uint32_t start_base = end_base + seg_x2 + 2;
            const uint32_t delta_base = start_base + seg_x2;
            const uint32_t range_base = delta_base + seg_x2;
            for (uint16_t i = 0; i < seg_x2 / 2; ++i) {
                if (r.u16(end_base + i * 2u) >= cp) {
                    const uint16_t start = r.u16(start_base + i * 2u);
                    if (start > cp) return 0;
                    const uint16_t delta = r.u16(delta_base + i * 2u);
                    const uint16_t range_off = r.u16(range_base + i * 2u);
                    if (range_off == 0) return static_cast<uint16_t>(cp + delta);
                    const uint32_t addr = range_base + i * 2u + range_off + (cp - start) * 2u;
                    const uint16_t gid = r.u16(addr);
                    return gid == 0 ? 0 : static_cast<uint16_t>(gid + delta);
                }
            }
            return 0;
        }
        case 6: {
            const uint16_t first = r.u16(s + 6);
            const uint16_t count = r.u16(s + 8);
            if (cp < first || cp >= static_cast<uint32_t>(first + count)) return 0;
            return r.u16(s + 10 + (cp - first) * 2u);
        }
        case 12: {
            const uint32_t n_groups = r.u32(s + 12);
            for (uint32_t g = 0; g < n_groups; ++g) {
                const size_t rec = s + 16 + static_cast<size_t>(g) * 12;
                const uint32_t start = r.u32(rec);
                const uint32_t end = r.u32(rec + 4);
                if (cp >= start && cp <= end) return static_cast<uint16_t>(r.u32(rec + 8) + (cp - start));
                if (cp < start) break;
            }
            return 0;
        }
        default:
            fail("ttf: unsupported cmap format %d in %s", cmap_format_, path_.c_str());
    }
}

bool TtfFont::has_codepoint(uint32_t cp) const { return glyph_index(cp) != 0; }

TtfFont::Outline TtfFont::outline_by_index(uint16_t gid, int depth) const {
    check(depth < 6, "ttf: composite glyph nesting too deep");
    Outline out;
    if (gid >= num_glyphs_) return out;
    const uint32_t g0 = loca_[gid], g1 = loca_[gid + 1u];
    if (g0 >= g1) return out;  // empty glyph (e.g. space)
    Reader r{data_.data(), data_.size()};
    const size_t g = glyf_off_ + g0;
    const int16_t n_contours = r.i16(g);
    const double tol = units_per_em_ / 256.0;

    if (n_contours >= 0) {
        std::vector<uint16_t> ends(static_cast<size_t>(n_contours));
        size_t off = g + 10;
        for (int i = 0; i < n_contours; ++i, off += 2) ends[static_cast<size_t>(i)] = r.u16(off);
        const uint16_t n_pts = n_contours > 0 ? ends.back() + 1u : 0;
        const uint16_t instr_len = r.u16(off);
        off += 2 + instr_len;

        std::vector<uint8_t> flags;
        flags.reserve(n_pts);
        while (flags.size() < n_pts) {
            const uint8_t fl = r.u8(off++);
            flags.push_back(fl);
            if (fl & 0x08) {  // repeat
                uint8_t rep = r.u8(off++);
                while (rep-- && flags.size() < n_pts) flags.push_back(fl);
            }
        }
        std::vector<double> xs(n_pts), ys(n_pts);
        double x = 0;
        for (uint16_t i = 0; i < n_pts; ++i) {
            const uint8_t fl = flags[i];
            if (fl & 0x02) {
                const uint8_t d = r.u8(off++);
                x += (fl & 0x10) ? d : -static_cast<double>(d);
            } else if (!(fl & 0x10)) {
                x += r.i16(off);
                off += 2;
            }
            xs[i] = x;
        }
        double y = 0;
        for (uint16_t i = 0; i < n_pts; ++i) {
            const uint8_t fl = flags[i];
            if (fl & 0x04) {
                const uint8_t d = r.u8(off++);
                y += (fl & 0x20) ? d : -static_cast<double>(d);
            } else if (!(fl & 0x20)) {
                y += r.i16(off);
                off += 2;
            }
            ys[i] = y;
        }

        uint16_t start = 0;
        for (int ci = 0; ci < n_contours; ++ci) {
            const uint16_t end = ends[static_cast<size_t>(ci)];
            const int count = end - start + 1;
            if (count <= 1) {
                start = end + 1u;
                continue;
            }
            auto pt = [&](int i) {
                const int idx = start + ((i % count) + count) % count;
                return Point{xs[static_cast<size_t>(idx)], ys[static_cast<size_t>(idx)]};
            };
            auto on_curve = [&](int i) {
                const int idx = start + ((i % count) + count) % count;
                return (flags[static_cast<size_t>(idx)] & 0x01) != 0;
            };
            // find a starting on-curve point (synthesize one from midpoints if needed)
            int first_on = -1;
            for (int i = 0; i < count; ++i)
                if (on_curve(i)) {
                    first_on = i;
                    break;
                }
            std::vector<Point> contour;
            if (first_on < 0) {
                // all off-curve: start at the midpoint of the last/first pair
                Point prev_mid{(pt(0).x + pt(count - 1).x) / 2, (pt(0).y + pt(count - 1).y) / 2};
                contour.push_back(prev_mid);
                for (int i = 0; i < count; ++i) {
                    const Point c = pt(i);
                    const Point next{(pt(i).x + pt(i + 1).x) / 2, (pt(i).y + pt(i + 1).y) / 2};
                    flatten_quad(contour, contour.back(), c, next, tol);
                }
            } else {
                contour.push_back(pt(first_on));
                int i = first_on;
                int done = 0;
                while (done < count) {
                    const int ni = i + 1;
                    if (on_curve(ni)) {
                        contour.push_back(pt(ni));
                        i = ni;
                        ++done;
                    } else {
                        // off-curve control; the following point (or implied
                        // midpoint) closes the quadratic
                        const Point c = pt(ni);
                        Point end_pt;
                        if (on_curve(ni + 1)) {
                            end_pt = pt(ni + 1);
                            i = ni + 1;
                            done += 2;
                        } else {
                            end_pt = Point{(pt(ni).x + pt(ni + 1).x) / 2,
                                           (pt(ni).y + pt(ni + 1).y) / 2};
                            i = ni;
                            ++done;
                        }
                        flatten_quad(contour, contour.back(), c, end_pt, tol);
                    }
                }
            }
            if (contour.size() >= 3) out.contours.push_back(std::move(contour));
            start = end + 1u;
        }
    } else {
        // composite glyph
        size_t off = g + 10;
        for (;;) {
            const uint16_t flags = r.u16(off);
            const uint16_t sub_gid = r.u16(off + 2);
            off += 4;
            double dx = 0, dy = 0;
            if (flags & 0x0001) {  // words
                if (flags & 0x0002) {
                    dx = r.i16(off);
                    dy = r.i16(off + 2);
                }
                off += 4;
            } else {
                if (flags & 0x0002) {
                    dx = static_cast<int8_t>(r.u8(off));
                    dy = static_cast<int8_t>(r.u8(off + 1));
                }
                off += 2;
            }
            double a = 1, b = 0, c = 0, d = 1;
            if (flags & 0x0008) {
                a = d = r.i16(off) / 16384.0;
                off += 2;
            } else if (flags & 0x0040) {
                a = r.i16(off) / 16384.0;
                d = r.i16(off + 2) / 16384.0;
                off += 4;
            } else if (flags & 0x0080) {
                a = r.i16(off) / 16384.0;
                b = r.i16(off + 2) / 16384.0;
                c = r.i16(off + 4) / 16384.0;
                d = r.i16(off + 6) / 16384.0;
                off += 8;
            }
            Outline sub = outline_by_index(sub_gid, depth + 1);
            for (auto& contour : sub.contours) {
                for (Point& p : contour) {
                    const double nx = a * p.x + c * p.y + dx;
                    const double ny = b * p.x + d * p.y + dy;
                    p = {nx, ny};
                }
                out.contours.push_back(std::move(contour));
            }
            if (!(flags & 0x0020)) break;  // MORE_COMPONENTS
        }
    }

    if (!out.contours.empty()) {
        out.xmin = out.ymin = 1e300;
        out.xmax = out.ymax = -1e300;
        for (const auto& contour : out.contours)
            for (const Point& p : contour) {
                out.xmin = std::min(out.xmin, p.x);
                out.xmax = std::max(out.xmax, p.x);
                out.ymin = std::min(out.ymin, p.y);
                out.ymax = std::max(out.ymax, p.y);
            }
    }
    return out;
}

TtfFont::Outline TtfFont::glyph_outline(uint32_t cp) const {
    const uint16_t gid = glyph_index(cp);
    if (gid == 0)
        fail("ttf: font %s has no glyph for codepoint U+%04X", path_.c_str(), cp);
    return outline_by_index(gid, 0);
}

uint32_t utf8_single_codepoint(const std::string& s) {
    check(!s.empty(), "utf8: empty string");
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    uint32_t cp = 0;
    size_t len = 0;
    if (p[0] < 0x80) {
        cp = p[0];
        len = 1;
    } else if ((p[0] >> 5) == 0x6) {
        cp = p[0] & 0x1F;
        len = 2;
    } else if ((p[0] >> 4) == 0xE) {
        cp = p[0] & 0x0F;
        len = 3;
    } else if ((p[0] >> 3) == 0x1E) {
        cp = p[0] & 0x07;
        len = 4;
    } else {
        fail("utf8: malformed lead byte 0x%02X", p[0]);
    }
    check(s.size() == len, "utf8: expected exactly one character, got '" + s + "'");
    for (size_t i = 1; i < len; ++i) {
        check((p[i] >> 6) == 0x2, "utf8: malformed continuation byte");
        cp = (cp << 6) | (p[i] & 0x3F);
    }
    return cp;
}

GlyphImage render_font_glyph(const TtfFont& font, const std::string& utf8_char, int size) {
    check(size >= 8, "render_font_glyph: size too small");
    const uint32_t cp = utf8_single_codepoint(utf8_char);
    if (!font.has_codepoint(cp))
        fail("render_font_glyph: font %s has no glyph for '%s' (U+%04X)", font.path().c_str(),
             utf8_char.c_str(), cp);
    TtfFont::Outline outline = font.glyph_outline(cp);
    if (outline.empty() || outline.xmax - outline.xmin <= 0 || outline.ymax - outline.ymin <= 0)
        fail("render_font_glyph: '%s' renders blank in %s (whitespace rejected)",
             utf8_char.c_str(), font.path().c_str());

    // fit longest side to 90% of the canvas, centered; flip y to image coords
    const double w = outline.xmax - outline.xmin;
    const double h = outline.ymax - outline.ymin;
    const double scale = 0.9 * size / std::max(w, h);
    const double cx = 0.5 * (outline.xmin + outline.xmax);
    const double cy = 0.5 * (outline.ymin + outline.ymax);
    struct Edge {
        double x0, y0, x1, y1;
    };
    std::vector<Edge> edges;
    for (const auto& contour : outline.contours) {
        for (size_t i = 0; i < contour.size(); ++i) {
            const TtfFont::Point& a = contour[i];
            const TtfFont::Point& b = contour[(i + 1) % contour.size()];
            const double ax = (a.x - cx) * scale + 0.5 * size;
            const double ay = 0.5 * size - (a.y - cy) * scale;
            const double bx = (b.x - cx) * scale + 0.5 * size;
            const double by = 0.5 * size - (b.y - cy) * scale;
            if (ay != by) edges.push_back({ax, ay, bx, by});
        }
    }

    // nonzero-winding scanline fill, 4 subsamples per pixel row with exact
    // horizontal spans
    std::vector<double> cover(static_cast<size_t>(size) * size, 0.0);
    std::vector<std::pair<double, int>> xs;
    for (int py = 0; py < size; ++py) {
        for (int sub = 0; sub < 4; ++sub) {
            const double sy = py + (sub + 0.5) / 4.0;
            xs.clear();
            for (const Edge& e : edges) {
                const double ymin = std::min(e.y0, e.y1);
                const double ymax = std::max(e.y0, e.y1);
                if (sy < ymin || sy >= ymax) continue;
                const double t = (sy - e.y0) / (e.y1 - e.y0);
                xs.emplace_back(e.x0 + t * (e.x1 - e.x0), e.y1 > e.y0 ? 1 : -1);
            }
            std::sort(xs.begin(), xs.end());
            int winding = 0;
            double span_start = 0;
            for (const auto& [x, dir] : xs) {
                if (winding == 0) span_start = x;
                winding += dir;
                if (winding == 0) {
                    // fill [span_start, x) at weight 1/4
                    double xa = std::clamp(span_start, 0.0, static_cast<double>(size));
                    double xb = std::clamp(x, 0.0, static_cast<double>(size));
                    int pa = static_cast<int>(xa);
                    const int pb = std::min(size - 1, static_cast<int>(xb));
                    for (int px = pa; px <= pb && px < size; ++px) {
                        const double lo = std::max(xa, static_cast<double>(px));
                        const double hi = std::min(xb, static_cast<double>(px + 1));
                        if (hi > lo)
                            cover[static_cast<size_t>(py) * size + px] += (hi - lo) * 0.25;
                    }
                }
            }
        }
    }

    nn::Tensor t({3, size, size});
    const int hw = size * size;
    bool any_ink = false;
    for (int i = 0; i < hw; ++i) {
        const double c = std::clamp(cover[static_cast<size_t>(i)], 0.0, 1.0);
        if (c > 0.5) any_ink = true;
        const double v = 1.0 - 2.0 * c;
        t[0 * hw + i] = v;
        t[1 * hw + i] = v;
        t[2 * hw + i] = v;
    }
    if (!any_ink)
        fail("render_font_glyph: '%s' produced a blank canvas in %s", utf8_char.c_str(),
             font.path().c_str());
    return GlyphImage(std::move(t));
}

}  // namespace glyphsynth
