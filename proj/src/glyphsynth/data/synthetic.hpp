#pragma once

#include <array>
#include <string>
#include <vector>

#include "glyphsynth/data/image.hpp"
#include "glyphsynth/decomposition.hpp"
#include "glyphsynth/rng.hpp"

namespace glyphsynth {

// Deterministic per-style rendering parameters. A style is reproducible from
// (corpus seed, style id): bins come from a stratified grid so that no two
// styles collapse onto near-identical appearances, jitter from a derived
// stream.
struct SyntheticStyleParams {
    double stroke_width = 0.07;   // fraction of canvas
    double slant = 0.0;           // radians
    double corner_radius = 0.5;   // 0 = square caps, 1 = round caps
    double scale_jitter = 0.05;   // per-glyph size wobble amplitude
    int fill_texture = 0;         // 0 = solid, 1 = hatched
};

enum class LayoutKind { Single, LeftRight, TopBottom, LeftPair, Quad };

struct Rect {
    double x0, y0, x1, y1;  // unit canvas coords
};

// A synthetic "character": primitives assigned to the slots of one layout,
// listed in reading order. Its component sequence is the primitive id list.
struct SyntheticChar {
    LayoutKind layout;
    std::vector<int> primitives;
};

// Slot rectangles in reading order (top-left-ish slot first).
std::vector<Rect> layout_slots(LayoutKind kind);

int synthetic_primitive_count_limit();

SyntheticStyleParams synthetic_style_params(uint64_t corpus_seed, int style_id);

// Renders one glyph at size x size; white background, dark ink, [-1,1].
GlyphImage render_synthetic_glyph(const SyntheticChar& ch, const SyntheticStyleParams& style,
                                  int size, uint64_t corpus_seed, int style_id, int char_id);

// Pixel-space bounding boxes of each component (reading order), accounting
// for slant and stroke width. Used by the attention-localization checks.
std::vector<Rect> synthetic_component_boxes(const SyntheticChar& ch,
                                            const SyntheticStyleParams& style, int size);

struct SyntheticCorpusSpec {
    int n_styles = 10;
    int n_primitives = 10;
    int n_chars = 100;
    int img_size = 32;
    uint64_t seed = 1;
};

// Generates characters (unique by construction; throws if the combination
// space cannot supply n_chars), renders every (style, char) pair and writes
// the on-disk layout:
//   images/<style_id>/<char_id>.png
//   meta/records.tsv | decomposition.tsv | vocab.txt | styles.tsv | boxes.tsv | corpus.json
void make_synthetic_corpus(const SyntheticCorpusSpec& spec, const std::string& out_dir);

// The deterministic character list for a spec (same sampling path as
// make_synthetic_corpus); exposed so tests can cross-check ground truth.
std::vector<SyntheticChar> synthetic_characters(const SyntheticCorpusSpec& spec);

}  // namespace glyphsynth
