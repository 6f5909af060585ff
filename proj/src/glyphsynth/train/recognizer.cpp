#include "glyphsynth/train/recognizer.hpp"

#include "glyphsynth/model/checkpoint.hpp"
#include "glyphsynth/train/losses.hpp"

namespace glyphsynth {

using namespace nn;

std::unique_ptr<Cam> train_recognizer(const Corpus& corpus, const RecognizerTrainConfig& cfg) {
    check(!cfg.style_pool.empty() && !cfg.char_pool.empty(),
          "train_recognizer: empty style or char pool");
    check(cfg.cam.img_size == corpus.img_size(), "train_recognizer: img_size mismatch");

    auto cam = std::make_unique<Cam>(cfg.cam);
    Rng init_rng = Rng::derive(cfg.seed, 0x5EC0ULL);
    init_gaussian(*cam, cfg.init_std, init_rng);
    Adam opt(cam->parameters(), cfg.lr, cfg.beta1, cfg.beta2);
    Rng rng = Rng::derive(cfg.seed, 0x5EC1ULL);

    cam->set_training(true);
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<Tensor> imgs;
        std::vector<ComponentSequence> targets;
        std::vector<int> labels;
        for (int b = 0; b < cfg.batch; ++b) {
            const int s = cfg.style_pool[static_cast<size_t>(
                rng.index(static_cast<int>(cfg.style_pool.size())))];
            const int c = cfg.char_pool[static_cast<size_t>(
                rng.index(static_cast<int>(cfg.char_pool.size())))];
            imgs.push_back(corpus.image(s, c));
            targets.push_back(corpus.components(c));
            labels.push_back(s);
        }
        Var images = Var::constant(stack_images(imgs));
        Var feat = cam->encode_features(images);
        BatchRollout roll = cam->decoder().decode_teacher_forced(feat, targets);
        Var loss = structure_retention_loss(roll, targets, cfg.cam.vocab_size - 1);
        if (cfg.train_style_head)
            loss = add(loss, style_matching_loss(*cam, feat, &roll, labels));
        loss.backward();
        opt.step();
        opt.zero_grad();
        if (cfg.log_every > 0 && (step + 1) % cfg.log_every == 0)
            log_info("recognizer step %d/%d loss %.4f", step + 1, cfg.steps, loss.item());
    }
    cam->set_training(false);
    return cam;
}

double recognizer_sequence_accuracy(Cam& cam, const Corpus& corpus,
                                    const std::vector<int>& styles,
                                    const std::vector<int>& chars) {
    check(!styles.empty() && !chars.empty(), "recognizer accuracy: empty pools");
    const bool was_training = cam.training();
    cam.set_training(false);
    NoGradGuard ng;
    int correct = 0, total = 0;
    std::vector<Tensor> imgs;
    std::vector<ComponentSequence> targets;
    auto flush = [&] {
        if (imgs.empty()) return;
        Var feat = cam.encode_features(Var::constant(stack_images(imgs)));
        BatchRollout roll = cam.decoder().decode_greedy(feat);
        for (size_t i = 0; i < imgs.size(); ++i) {
            if (roll.predictions[i] == targets[i].ids) ++correct;
            ++total;
        }
        imgs.clear();
        targets.clear();
    };
    for (int s : styles)
        for (int c : chars) {
            imgs.push_back(corpus.image(s, c));
            targets.push_back(corpus.components(c));
            if (imgs.size() == 16) flush();
        }
    flush();
    cam.set_training(was_training);
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

double classifier_style_accuracy(Cam& cam, const Corpus& corpus, const std::vector<int>& styles,
                                 const std::vector<int>& chars) {
    check(!styles.empty() && !chars.empty(), "classifier accuracy: empty pools");
    const bool was_training = cam.training();
    cam.set_training(false);
    NoGradGuard ng;
    int correct = 0, total = 0;
    for (int s : styles) {
        std::vector<Tensor> imgs;
        for (int c : chars) imgs.push_back(corpus.image(s, c));
        Var logits = cam.classify_style(cam.encode_features(Var::constant(stack_images(imgs))));
        const int n_styles = cam.config().n_styles;
        for (size_t i = 0; i < imgs.size(); ++i) {
            const double* row = logits.val().data() + static_cast<int64_t>(i) * n_styles;
            int best = 0;
            for (int k = 1; k < n_styles; ++k)
                if (row[k] > row[best]) best = k;
            if (best == s) ++correct;
            ++total;
        }
    }
    cam.set_training(was_training);
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

void save_recognizer(const std::string& path, Cam& cam) {
    CheckpointWriter writer;
    writer.meta()["kind"] = "recognizer";
    writer.meta()["cam_config"] = cam.config().to_json();
    writer.add_module("cam", cam);
    writer.write(path);
}

std::unique_ptr<Cam> load_recognizer(const std::string& path) {
    CheckpointReader reader(path);
    if (!reader.has_namespace("cam"))
        fail("recognizer: %s has no 'cam' namespace", path.c_str());
    auto cam = std::make_unique<Cam>(CamConfig::from_json(reader.meta().at("cam_config")));
    reader.load_module("cam", *cam);
    cam->set_training(false);
    return cam;
}

}  // namespace glyphsynth
