#include "glyphsynth/eval/protocol.hpp"

#include <fstream>

namespace glyphsynth {

using namespace nn;

GeneratedSet generate_grid(Generator& gen, const Corpus& corpus, const EvalProtocol& proto) {
    check(!proto.styles.empty() && !proto.chars.empty(), "generate_grid: empty split");
    check(corpus.has(proto.content_style, proto.chars.front()),
          "generate_grid: content style missing from corpus");
    const bool was_training = gen.training();
    gen.set_training(false);
    NoGradGuard ng;

    GeneratedSet out;
    std::vector<Tensor> style_refs, content_refs;
    std::vector<std::pair<int, int>> pairs;
    auto flush = [&] {
        if (pairs.empty()) return;
        Var fake = gen.generate(Var::constant(stack_images(style_refs)),
                                Var::constant(stack_images(content_refs)));
        const int64_t chw = fake.val().numel() / static_cast<int64_t>(pairs.size());
        for (size_t i = 0; i < pairs.size(); ++i) {
            Tensor img({3, corpus.img_size(), corpus.img_size()});
            std::copy(fake.val().data() + static_cast<int64_t>(i) * chw,
                      fake.val().data() + static_cast<int64_t>(i + 1) * chw, img.data());
            out.style_ids.push_back(pairs[i].first);
            out.char_ids.push_back(pairs[i].second);
            out.images.push_back(std::move(img));
            out.targets.push_back(corpus.has(pairs[i].first, pairs[i].second)
                                      ? corpus.image(pairs[i].first, pairs[i].second)
                                      : Tensor());
        }
        style_refs.clear();
        content_refs.clear();
        pairs.clear();
    };

    for (int s : proto.styles)
        for (int c : proto.chars) {
            style_refs.push_back(corpus.image(s, proto.ref_char));
            content_refs.push_back(corpus.image(proto.content_style, c));
            pairs.emplace_back(s, c);
            if (static_cast<int>(pairs.size()) == proto.batch) flush();
        }
    flush();
    gen.set_training(was_training);
    return out;
}

EvalResult evaluate_generated(const GeneratedSet& set, const Corpus& corpus, Cam* recognizer,
                              Cam* style_classifier, FeatureExtractor* fid_extractor,
                              const std::vector<int>& fid_real_styles) {
    check(!set.images.empty(), "evaluate_generated: empty set");
    EvalResult out;

    int paired = 0;
    double ssim_acc = 0.0, rmse_acc = 0.0;
    for (size_t i = 0; i < set.images.size(); ++i) {
        if (!set.targets[i].defined()) continue;
        ssim_acc += ssim(set.images[i], set.targets[i]);
        rmse_acc += rmse(set.images[i], set.targets[i]);
        ++paired;
    }
    out.metrics.count = static_cast<int>(set.images.size());
    if (paired > 0) {
        out.metrics.ssim_mean = ssim_acc / paired;
        out.metrics.rmse_mean = rmse_acc / paired;
    }

    if (recognizer) {
        NoGradGuard ng;
        recognizer->set_training(false);
        int correct = 0;
        for (size_t i = 0; i < set.images.size(); i += 16) {
            std::vector<Tensor> chunk;
            for (size_t j = i; j < std::min(i + 16, set.images.size()); ++j)
                chunk.push_back(set.images[j]);
            Var feat = recognizer->encode_features(Var::constant(stack_images(chunk)));
            BatchRollout roll = recognizer->decoder().decode_greedy(feat);
            for (size_t j = 0; j < chunk.size(); ++j)
                if (roll.predictions[j] ==
                    corpus.components(set.char_ids[i + j]).ids)
                    ++correct;
        }
        out.component_accuracy = static_cast<double>(correct) / set.images.size();
    }

    if (style_classifier) {
        NoGradGuard ng;
        style_classifier->set_training(false);
        const int n_styles = style_classifier->config().n_styles;
        int correct = 0;
        for (size_t i = 0; i < set.images.size(); i += 16) {
            std::vector<Tensor> chunk;
            for (size_t j = i; j < std::min(i + 16, set.images.size()); ++j)
                chunk.push_back(set.images[j]);
            Var logits = style_classifier->classify_style(
                style_classifier->encode_features(Var::constant(stack_images(chunk))));
            for (size_t j = 0; j < chunk.size(); ++j) {
                const double* row = logits.val().data() + static_cast<int64_t>(j) * n_styles;
                int best = 0;
                for (int k = 1; k < n_styles; ++k)
                    if (row[k] > row[best]) best = k;
                if (best == set.style_ids[i + j]) ++correct;
            }
        }
        out.style_accuracy = static_cast<double>(correct) / set.images.size();
    }

    if (fid_extractor) {
        std::vector<std::vector<double>> fake_feats, real_feats;
        for (const Tensor& img : set.images) fake_feats.push_back(fid_extractor->extract(img));
        // real side: the same characters rendered in the evaluated styles
        std::vector<int> styles = fid_real_styles;
        if (styles.empty()) {
            styles = set.style_ids;
            std::sort(styles.begin(), styles.end());
            styles.erase(std::unique(styles.begin(), styles.end()), styles.end());
        }
        std::vector<int> chars = set.char_ids;
        std::sort(chars.begin(), chars.end());
        chars.erase(std::unique(chars.begin(), chars.end()), chars.end());
        for (int s : styles)
            for (int c : chars)
                if (corpus.has(s, c)) real_feats.push_back(fid_extractor->extract(corpus.image(s, c)));
        if (real_feats.size() >= 2 && fake_feats.size() >= 2) {
            out.metrics.fid_value = fid(real_feats, fake_feats);
            out.metrics.fid_backbone = fid_extractor->name();
        }
    }
    return out;
}

EvalResult evaluate_one_shot(Generator& gen, const Corpus& corpus, const EvalProtocol& proto,
                             Cam* recognizer, Cam* style_classifier,
                             FeatureExtractor* fid_extractor) {
    GeneratedSet set = generate_grid(gen, corpus, proto);
    return evaluate_generated(set, corpus, recognizer, style_classifier, fid_extractor,
                              proto.styles);
}

std::vector<std::string> EvalResult::key_values() const {
    std::vector<std::string> out = metrics.key_values();
    char buf[64];
    if (component_accuracy) {
        std::snprintf(buf, sizeof(buf), "component_accuracy=%.6f", *component_accuracy);
        out.emplace_back(buf);
    }
    if (style_accuracy) {
        std::snprintf(buf, sizeof(buf), "style_accuracy=%.6f", *style_accuracy);
        out.emplace_back(buf);
    }
    return out;
}

void EvalResult::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail("EvalResult: cannot write %s", path.c_str());
    for (const std::string& line : key_values()) out << line << '\n';
}

}  // namespace glyphsynth
