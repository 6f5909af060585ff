#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "glyphsynth/data/image.hpp"
#include "glyphsynth/data/synthetic.hpp"
#include "glyphsynth/decomposition.hpp"
#include "glyphsynth/rng.hpp"

namespace glyphsynth {

struct SampleRef {
    int style_id = -1;
    int char_id = -1;
    bool operator==(const SampleRef& o) const {
        return style_id == o.style_id && char_id == o.char_id;
    }
};

// Immutable after load; concurrent readers are fine.
class Corpus {
public:
    static Corpus load(const std::string& dir);

    int img_size() const { return img_size_; }
    int n_styles() const { return n_styles_; }
    int n_chars() const { return n_chars_; }
    const std::string& kind() const { return kind_; }
    uint64_t seed() const { return seed_; }

    const ComponentVocab& vocab() const { return vocab_; }
    const DecompositionTable& table() const { return table_; }
    const std::string& char_symbol(int char_id) const;
    const ComponentSequence& components(int char_id) const;

    bool has(int style_id, int char_id) const;
    nn::Tensor image(int style_id, int char_id) const;  // [3,S,S] in [-1,1]

    // Ground-truth component boxes (reading order); empty when the corpus
    // carries no box metadata (real-font corpora).
    std::vector<Rect> component_boxes(int style_id, int char_id) const;

    size_t record_count() const { return index_.size(); }

private:
    int img_size_ = 0, n_styles_ = 0, n_chars_ = 0;
    uint64_t seed_ = 0;
    std::string kind_;
    ComponentVocab vocab_;
    DecompositionTable table_;
    std::vector<std::string> char_symbols_;
    std::unordered_map<int64_t, std::vector<uint8_t>> images_;  // key -> RGB8
    std::unordered_map<int64_t, std::vector<Rect>> boxes_;
    std::unordered_map<int64_t, bool> index_;

    static int64_t key(int style_id, int char_id) {
        return (static_cast<int64_t>(style_id) << 32) | static_cast<uint32_t>(char_id);
    }
};

struct SamplerConfig {
    int batch = 16;
    // <0 selects the default: exactly one dedicated identity slot per batch.
    // Otherwise each slot independently becomes an identity slot w.p. p_idt.
    double p_idt = -1.0;
    int content_style = 0;  // source style for content references
    std::vector<int> style_pool;
    std::vector<int> char_pool;
    bool with_replacement = true;
    bool paired_targets = false;  // adds image(style_label, content_char) per slot
};

struct TrainingBatch {
    nn::Tensor style_images;    // [B,3,S,S]
    nn::Tensor content_images;  // [B,3,S,S]
    std::vector<int> style_labels;
    std::vector<ComponentSequence> style_components;
    std::vector<ComponentSequence> content_components;
    std::vector<SampleRef> style_refs;
    std::vector<SampleRef> content_refs;
    std::vector<uint8_t> identity;  // 1 where the content record equals the style record
    nn::Tensor paired_targets;      // defined only when SamplerConfig::paired_targets

    int batch() const { return static_cast<int>(style_labels.size()); }
};

// Style and content sides are drawn independently and uniformly from their
// pools (content from the configured source style).
TrainingBatch sample_batch(const Corpus& corpus, const SamplerConfig& cfg, Rng& rng);

struct FontCorpusSpec {
    std::vector<std::string> font_paths;  // style_id = index
    std::string chars_file;               // UTF-8, one character per line
    std::string decomposition_tsv;
    std::string vocab_file;
    int img_size = 128;
};

// Rasterizes every (font, char) pair into the same on-disk corpus layout the
// synthetic generator emits (without box metadata).
void build_font_corpus(const FontCorpusSpec& spec, const std::string& out_dir);

}  // namespace glyphsynth
