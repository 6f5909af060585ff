#pragma once

#include <fstream>
#include <memory>

#include "glyphsynth/data/corpus.hpp"
#include "glyphsynth/model/checkpoint.hpp"
#include "glyphsynth/model/generator.hpp"
#include "glyphsynth/train/config.hpp"
#include "glyphsynth/train/losses.hpp"

namespace glyphsynth {

// One trainer thread owns all parameters. Per iteration the three parties
// update in order D -> CAM -> G: the fake is computed once without gradients
// and shared (detached) by the D and CAM sub-steps, then recomputed with
// gradients for the G sub-step, which runs against grad-frozen D and CAM.
class Trainer {
public:
    Trainer(TrainConfig cfg, const Corpus& corpus);

    const TrainConfig& config() const { return cfg_; }

    TrainingBatch next_batch();
    LossReport train_step(const TrainingBatch& batch);

    // Full schedule: samples, steps, logs every step, checkpoints.
    void run();

    int64_t step() const { return step_; }
    int epoch() const { return static_cast<int>(step_ / steps_per_epoch_); }
    int steps_per_epoch() const { return steps_per_epoch_; }
    int64_t total_steps() const;
    double lr_for_step(int64_t step) const;

    void save_checkpoint(const std::string& path);
    // Restores nets, optimizer moments, step counter and sampler RNG. The
    // stored config is authoritative; config_version mismatches are errors.
    static std::unique_ptr<Trainer> resume(const std::string& checkpoint_path,
                                           const Corpus& corpus);

    Generator& generator() { return *gen_; }
    Cam& cam() { return *cam_; }
    bool has_cam() const { return cam_ != nullptr; }
    UnetDiscriminator& discriminator() { return *disc_; }
    nn::Adam& gen_opt() { return *opt_g_; }
    nn::Adam& cam_opt() { return *opt_cam_; }
    nn::Adam& disc_opt() { return *opt_d_; }

    const std::vector<int>& train_styles() const { return train_styles_; }
    const std::vector<int>& train_chars() const { return train_chars_; }
    std::vector<int> val_styles() const;
    std::vector<int> val_chars() const;

    // Exposed for the character-level supervision wiring and tests.
    std::vector<ComponentSequence> supervision_targets(
        const std::vector<ComponentSequence>& components,
        const std::vector<SampleRef>& refs) const;

private:
    Trainer(TrainConfig cfg, const Corpus& corpus, bool init);
    void build(bool init);
    void append_metrics(const LossReport& report);
    void dump_failed_batch(const TrainingBatch& batch, const char* term) const;
    GanForm gan_form() const {
        return cfg_.g_loss_form == "saturating" ? GanForm::Saturating : GanForm::NonSaturating;
    }

    TrainConfig cfg_;
    const Corpus& corpus_;
    Rng sample_rng_;
    int steps_per_epoch_ = 1;
    int64_t step_ = 0;

    std::unique_ptr<Generator> gen_;
    std::unique_ptr<Cam> cam_;
    std::unique_ptr<UnetDiscriminator> disc_;
    std::unique_ptr<nn::Adam> opt_g_, opt_cam_, opt_d_;

    std::vector<int> train_styles_, train_chars_;
    std::ofstream metrics_;
};

}  // namespace glyphsynth
