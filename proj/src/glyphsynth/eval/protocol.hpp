#pragma once

#include <optional>

#include "glyphsynth/data/corpus.hpp"
#include "glyphsynth/eval/metrics.hpp"
#include "glyphsynth/model/generator.hpp"

namespace glyphsynth {

// One-shot evaluation over a (styles x chars) grid: for every pair the style
// reference is the corpus image (style, ref_char) and the content reference
// comes from the source style. Ground-truth targets are used for SSIM/RMSE
// when the corpus has the pair.
struct EvalProtocol {
    std::vector<int> styles;
    std::vector<int> chars;
    int content_style = 0;
    int ref_char = 0;  // the one-shot style reference character (a train char)
    int batch = 16;
};

struct GeneratedSet {
    std::vector<int> style_ids;
    std::vector<int> char_ids;
    std::vector<nn::Tensor> images;   // generated glyphs
    std::vector<nn::Tensor> targets;  // ground truth where available (paired with images)
};

GeneratedSet generate_grid(Generator& gen, const Corpus& corpus, const EvalProtocol& proto);

struct EvalResult {
    MetricReport metrics;
    std::optional<double> component_accuracy;  // under the provided recognizer
    std::optional<double> style_accuracy;      // under the provided classifier

    std::vector<std::string> key_values() const;
    void save(const std::string& path) const;
};

// recognizer / classifier / fid_extractor may each be null.
EvalResult evaluate_generated(const GeneratedSet& set, const Corpus& corpus, Cam* recognizer,
                              Cam* style_classifier, FeatureExtractor* fid_extractor,
                              const std::vector<int>& fid_real_styles);

// Convenience wrapper: generate + evaluate.
EvalResult evaluate_one_shot(Generator& gen, const Corpus& corpus, const EvalProtocol& proto,
                             Cam* recognizer, Cam* style_classifier,
                             FeatureExtractor* fid_extractor);

}  // namespace glyphsynth
