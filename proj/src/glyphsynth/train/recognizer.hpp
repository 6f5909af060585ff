#pragma once

#include <functional>
#include <memory>

#include "glyphsynth/data/corpus.hpp"
#include "glyphsynth/model/cam.hpp"

namespace glyphsynth {

// Standalone CAM training on real glyphs only: structure retention plus style
// matching. Serves as the held-out recognizer / style classifier for
// evaluation and as the FID feature backbone at desk scale.
struct RecognizerTrainConfig {
    CamConfig cam;  // n_styles and vocab_size must be set by the caller
    int steps = 2000;
    int batch = 8;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double init_std = 0.02;
    uint64_t seed = 1;
    std::vector<int> style_pool;
    std::vector<int> char_pool;
    bool train_style_head = true;
    int log_every = 0;  // stderr cadence; 0 silences
};

std::unique_ptr<Cam> train_recognizer(const Corpus& corpus, const RecognizerTrainConfig& cfg);

// Greedy sequence accuracy over (style, char) pairs of real corpus images.
double recognizer_sequence_accuracy(Cam& cam, const Corpus& corpus,
                                    const std::vector<int>& styles,
                                    const std::vector<int>& chars);

// Whole-image style accuracy of the CLS head over real images.
double classifier_style_accuracy(Cam& cam, const Corpus& corpus, const std::vector<int>& styles,
                                 const std::vector<int>& chars);

void save_recognizer(const std::string& path, Cam& cam);
std::unique_ptr<Cam> load_recognizer(const std::string& path);

}  // namespace glyphsynth
