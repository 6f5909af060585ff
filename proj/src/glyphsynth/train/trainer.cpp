#include "glyphsynth/train/trainer.hpp"

#include <cmath>
#include <filesystem>

#include "glyphsynth/data/png_io.hpp"

namespace glyphsynth {

using namespace nn;
namespace fs = std::filesystem;

namespace {
constexpr int kConfigVersion = 1;
}

Trainer::Trainer(TrainConfig cfg, const Corpus& corpus) : Trainer(std::move(cfg), corpus, true) {}

Trainer::Trainer(TrainConfig cfg, const Corpus& corpus, bool init)
    : cfg_(std::move(cfg)), corpus_(corpus), sample_rng_(cfg_.seed) {
    cfg_.validate();
    check(cfg_.img_size == corpus_.img_size(), "trainer: config img_size " +
                                                   std::to_string(cfg_.img_size) +
                                                   " does not match corpus " +
                                                   std::to_string(corpus_.img_size()));
    build(init);
}

void Trainer::build(bool init) {
    check(cfg_.n_val_styles < corpus_.n_styles(), "trainer: n_val_styles exhausts the corpus");
    check(cfg_.n_val_chars < corpus_.n_chars(), "trainer: n_val_chars exhausts the corpus");
    for (int s = 0; s < corpus_.n_styles() - cfg_.n_val_styles; ++s) train_styles_.push_back(s);
    for (int c = 0; c < corpus_.n_chars() - cfg_.n_val_chars; ++c) train_chars_.push_back(c);

    const int train_records =
        static_cast<int>(train_styles_.size()) * static_cast<int>(train_chars_.size());
    steps_per_epoch_ = cfg_.steps_per_epoch > 0
                           ? cfg_.steps_per_epoch
                           : std::max(1, (train_records + cfg_.batch - 1) / cfg_.batch);

    gen_ = std::make_unique<Generator>(make_generator_config(cfg_));

    if (cfg_.supervision != SupervisionLevel::Pixel) {
        const int vocab = cfg_.supervision == SupervisionLevel::Character
                              ? corpus_.n_chars() + 1
                              : corpus_.vocab().size();
        cam_ = std::make_unique<Cam>(
            make_cam_config(cfg_, static_cast<int>(train_styles_.size()), vocab));
    }

    disc_ = std::make_unique<UnetDiscriminator>(make_disc_config(cfg_));

    if (init) {
        Rng init_rng = Rng::derive(cfg_.seed, 0x1417ULL);
        init_gaussian(*gen_, cfg_.init_std, init_rng);
        if (cam_) init_gaussian(*cam_, cfg_.init_std, init_rng);
        init_gaussian(*disc_, cfg_.init_std, init_rng);
    }

    opt_g_ = std::make_unique<Adam>(gen_->parameters(), cfg_.lr, cfg_.beta1, cfg_.beta2);
    if (cam_)
        opt_cam_ = std::make_unique<Adam>(cam_->parameters(), cfg_.lr, cfg_.beta1, cfg_.beta2);
    opt_d_ = std::make_unique<Adam>(disc_->parameters(), cfg_.lr, cfg_.beta1, cfg_.beta2);
}

std::vector<int> Trainer::val_styles() const {
    std::vector<int> out;
    for (int s = corpus_.n_styles() - cfg_.n_val_styles; s < corpus_.n_styles(); ++s)
        out.push_back(s);
    return out;
}

std::vector<int> Trainer::val_chars() const {
    std::vector<int> out;
    for (int c = corpus_.n_chars() - cfg_.n_val_chars; c < corpus_.n_chars(); ++c)
        out.push_back(c);
    return out;
}

int64_t Trainer::total_steps() const {
    const int64_t full = static_cast<int64_t>(cfg_.epochs_total) * steps_per_epoch_;
    return cfg_.max_steps > 0 ? std::min<int64_t>(full, cfg_.max_steps) : full;
}

double Trainer::lr_for_step(int64_t step) const {
    return lr_for_epoch(static_cast<int>(step / steps_per_epoch_), cfg_);
}

TrainingBatch Trainer::next_batch() {
    SamplerConfig scfg;
    scfg.batch = cfg_.batch;
    scfg.p_idt = cfg_.p_idt;
    scfg.content_style = cfg_.content_style;
    scfg.style_pool = train_styles_;
    scfg.char_pool = train_chars_;
    scfg.paired_targets = cfg_.supervision == SupervisionLevel::Pixel;
    return sample_batch(corpus_, scfg, sample_rng_);
}

std::vector<ComponentSequence> Trainer::supervision_targets(
    const std::vector<ComponentSequence>& components, const std::vector<SampleRef>& refs) const {
    if (cfg_.supervision != SupervisionLevel::Character) return components;
    // character-level ablation: singleton sequences of character ids
    std::vector<ComponentSequence> out;
    out.reserve(refs.size());
    for (const SampleRef& r : refs) out.push_back(ComponentSequence{{r.char_id}});
    return out;
}

LossReport Trainer::train_step(const TrainingBatch& batch) {
    check(batch.batch() >= 1, "train_step: empty batch");
    LossReport report;
    const GanForm form = gan_form();
    gen_->set_training(true);
    disc_->set_training(true);
    if (cam_) cam_->set_training(true);

    Var style_images = Var::constant(batch.style_images);
    Var content_images = Var::constant(batch.content_images);

    // fake computed once without gradients, shared by the D and CAM sub-steps
    Var fake_detached;
    {
        NoGradGuard ng;
        fake_detached = gen_->generate(style_images, content_images);
    }

    auto guard_finite = [&](const Var& v, const char* term) {
        for (const double x : v.val())
            if (!std::isfinite(x)) {
                dump_failed_batch(batch, term);
                fail("train_step: non-finite %s at step %lld (batch dumped to %s)", term,
                     static_cast<long long>(step_), cfg_.out_dir.c_str());
            }
    };

    // --- sub-step 1: discriminator ------------------------------------
    {
        DiscOutputs real_out = disc_->discriminate(style_images);
        DiscOutputs fake_out = disc_->discriminate(fake_detached);
        AdvLossD adv = adv_loss_d(real_out, fake_out, cfg_.lambda_dec);
        guard_finite(adv.total, "L_D");
        report.adv_enc = adv.enc.item();
        report.adv_dec = adv.dec.defined() ? adv.dec.item() : 0.0;
        report.l_d = adv.total.item();
        adv.total.backward();
        opt_d_->step();
        opt_d_->zero_grad();
    }

    // --- sub-step 2: component-aware module ----------------------------
    if (cam_ && cfg_.supervision != SupervisionLevel::Pixel) {
        const std::vector<ComponentSequence> style_targets =
            supervision_targets(batch.style_components, batch.style_refs);
        const std::vector<ComponentSequence> content_targets =
            supervision_targets(batch.content_components, batch.content_refs);

        Var feat_real = cam_->encode_features(style_images);
        Var l_cam;

        if (cfg_.cam_losses == CamAblation::Baseline) {
            Var sty = style_matching_loss(*cam_, feat_real, nullptr, batch.style_labels);
            report.sty_cam = sty.item();
            l_cam = sty;
        } else {
            BatchRollout roll_real = cam_->decoder().decode_teacher_forced(feat_real, style_targets);
            Var strc = structure_retention_loss(roll_real, style_targets,
                                                cam_->config().vocab_size - 1);
            report.strc_cam = strc.item();
            l_cam = strc;

            const bool local_sty = cfg_.cam_losses == CamAblation::StrcSty ||
                                   cfg_.cam_losses == CamAblation::Full;
            Var sty = style_matching_loss(*cam_, feat_real, local_sty ? &roll_real : nullptr,
                                          batch.style_labels);
            report.sty_cam = sty.item();
            l_cam = add(l_cam, sty);

            if (cfg_.cam_losses == CamAblation::Full) {
                // fake branch under no-grad: F and A never train on fakes
                Var feat_fake_ng;
                BatchRollout roll_fake_ng;
                {
                    NoGradGuard ng;
                    if (!cfg_.cam_bn_train_on_fake) cam_->set_training(false);
                    feat_fake_ng = cam_->encode_features(fake_detached);
                    roll_fake_ng =
                        cam_->decoder().decode_teacher_forced(feat_fake_ng, content_targets);
                    if (!cfg_.cam_bn_train_on_fake) cam_->set_training(true);
                }
                CompRealismCam comp =
                    component_realism_loss_cam(*cam_, feat_real, feat_fake_ng, roll_fake_ng);
                report.comp_cam = comp.total.item();
                l_cam = add(l_cam, comp.total);
            }
        }

        guard_finite(l_cam, "L_CAM");
        report.l_cam = l_cam.item();
        l_cam.backward();
        opt_cam_->step();
        opt_cam_->zero_grad();
    }

    // --- sub-step 3: generator -----------------------------------------
    {
        // gradients flow through frozen D and CAM into G
        disc_->set_requires_grad(false);
        if (cam_) cam_->set_requires_grad(false);

        StyleBundle style = gen_->encode_style(style_images);
        ContentFeature content = gen_->encode_content(content_images);
        Var fake = gen_->mix(style.feature_map, content.feature_map, content.skips, style.latent);

        AdvLossG adv = adv_loss_g(disc_->discriminate(fake), cfg_.lambda_dec, form);
        report.adv_g_enc = adv.enc.item();
        report.adv_g_dec = adv.dec.defined() ? adv.dec.item() : 0.0;
        report.adv_g = adv.total.item();
        Var l_g = adv.total;

        Var idt = identity_loss(style_images, fake, &batch.identity);
        report.idt = idt.item();
        l_g = add(l_g, idt);

        ContentFeature fake_content = gen_->encode_content(fake);
        Var cnt = content_loss(content.feature_map, fake_content.feature_map);
        report.cnt = cnt.item();
        l_g = add(l_g, mul_scalar(cnt, cfg_.lambda_cnt));

        if (cfg_.supervision == SupervisionLevel::Pixel) {
            check(batch.paired_targets.defined(),
                  "train_step: pixel supervision requires paired targets");
            Var pix = paired_l1_loss(fake, Var::constant(batch.paired_targets));
            report.pix = pix.item();
            l_g = add(l_g, mul_scalar(pix, cfg_.lambda_pix));
        } else if (cam_) {
            const std::vector<ComponentSequence> content_targets =
                supervision_targets(batch.content_components, batch.content_refs);
            if (!cfg_.cam_bn_train_on_fake) cam_->set_training(false);
            Var feat_fake = cam_->encode_features(fake);
            if (cfg_.cam_losses == CamAblation::Baseline) {
                Var sty_g = style_matching_loss(*cam_, feat_fake, nullptr, batch.style_labels);
                report.sty_g = sty_g.item();
                l_g = add(l_g, sty_g);
            } else {
                BatchRollout roll_fake =
                    cam_->decoder().decode_teacher_forced(feat_fake, content_targets);
                Var strc_g = structure_retention_loss(roll_fake, content_targets,
                                                      cam_->config().vocab_size - 1);
                report.strc_g = strc_g.item();
                l_g = add(l_g, strc_g);

                const bool local_sty = cfg_.cam_losses == CamAblation::StrcSty ||
                                       cfg_.cam_losses == CamAblation::Full;
                Var sty_g = style_matching_loss(*cam_, feat_fake, local_sty ? &roll_fake : nullptr,
                                                batch.style_labels);
                report.sty_g = sty_g.item();
                l_g = add(l_g, sty_g);

                if (cfg_.cam_losses == CamAblation::Full) {
                    Var comp_g = component_realism_loss_g(*cam_, feat_fake, roll_fake, form);
                    report.comp_g = comp_g.item();
                    l_g = add(l_g, comp_g);
                }
            }
            if (!cfg_.cam_bn_train_on_fake) cam_->set_training(true);
        }

        guard_finite(l_g, "L_G");
        report.l_g = l_g.item();
        l_g.backward();
        if (cfg_.grad_clip > 0.0) {
            double norm2 = 0.0;
            for (Parameter* p : gen_->parameters())
                if (p->var.has_grad())
                    for (const double g : p->var.grad()) norm2 += g * g;
            const double norm = std::sqrt(norm2);
            if (norm > cfg_.grad_clip) {
                const double scale = cfg_.grad_clip / norm;
                for (Parameter* p : gen_->parameters())
                    if (p->var.has_grad()) {
                        Tensor& g = const_cast<Tensor&>(p->var.grad());
                        for (double& v : g) v *= scale;
                    }
            }
        }
        opt_g_->step();
        opt_g_->zero_grad();

        disc_->set_requires_grad(true);
        if (cam_) cam_->set_requires_grad(true);
    }

    if (!report.all_finite()) {
        dump_failed_batch(batch, "report");
        fail("train_step: non-finite loss report at step %lld", static_cast<long long>(step_));
    }
    ++step_;
    return report;
}

void Trainer::append_metrics(const LossReport& report) {
    if (!metrics_.is_open()) {
        fs::create_directories(cfg_.out_dir);
        metrics_.open(fs::path(cfg_.out_dir) / "metrics.tsv", std::ios::app);
        check(metrics_.is_open(), "trainer: cannot open metrics log in " + cfg_.out_dir);
    }
    for (const std::string& line : report.lines(step_ - 1)) metrics_ << line << '\n';
    metrics_.flush();
}

void Trainer::dump_failed_batch(const TrainingBatch& batch, const char* term) const {
    const fs::path dir = fs::path(cfg_.out_dir) / "nan_dump";
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) return;
    for (int b = 0; b < batch.batch(); ++b) {
        const int64_t chw = 3LL * cfg_.img_size * cfg_.img_size;
        Tensor img({3, cfg_.img_size, cfg_.img_size});
        std::copy(batch.style_images.data() + b * chw, batch.style_images.data() + (b + 1) * chw,
                  img.data());
        write_png_rgb8((dir / ("style_" + std::to_string(b) + ".png")).string(),
                       image_to_rgb8(img));
        std::copy(batch.content_images.data() + b * chw,
                  batch.content_images.data() + (b + 1) * chw, img.data());
        write_png_rgb8((dir / ("content_" + std::to_string(b) + ".png")).string(),
                       image_to_rgb8(img));
    }
    std::ofstream note(dir / "term.txt");
    note << term << " at step " << step_ << "\n";
}

void Trainer::run() {
    const int64_t steps = total_steps();
    log_info("training: %lld steps (%d epochs x %d steps), batch %d, lr %g",
             static_cast<long long>(steps), cfg_.epochs_total, steps_per_epoch_, cfg_.batch,
             cfg_.lr);
    while (step_ < steps) {
        const double lr = lr_for_step(step_);
        opt_g_->set_lr(lr);
        if (opt_cam_) opt_cam_->set_lr(lr);
        opt_d_->set_lr(lr);

        TrainingBatch batch = next_batch();
        LossReport report = train_step(batch);
        append_metrics(report);
        if (cfg_.log_every > 0 && (step_ % cfg_.log_every == 0 || step_ == steps)) {
            log_info("step %lld/%lld lr %.2e L_D %.4f L_CAM %.4f L_G %.4f idt %.4f",
                     static_cast<long long>(step_), static_cast<long long>(steps), lr,
                     report.l_d, report.l_cam, report.l_g, report.idt);
        }
        const bool epoch_end = step_ % steps_per_epoch_ == 0;
        const bool periodic = cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0;
        if (epoch_end || periodic || step_ == steps) {
            fs::create_directories(cfg_.out_dir);
            save_checkpoint((fs::path(cfg_.out_dir) / "checkpoint.gsckpt").string());
        }
    }
}

void Trainer::save_checkpoint(const std::string& path) {
    CheckpointWriter writer;
    writer.meta()["config_version"] = kConfigVersion;
    writer.meta()["config"] = cfg_.to_json();
    writer.meta()["step"] = step_;
    writer.meta()["epoch"] = epoch();
    writer.meta()["sample_rng"] = sample_rng_.save_state();
    writer.add_module("gen", *gen_);
    if (cam_) writer.add_module("cam", *cam_);
    writer.add_module("disc", *disc_);
    writer.add_adam("opt/gen", *opt_g_);
    if (opt_cam_) writer.add_adam("opt/cam", *opt_cam_);
    writer.add_adam("opt/disc", *opt_d_);
    writer.write(path);
}

std::unique_ptr<Trainer> Trainer::resume(const std::string& checkpoint_path,
                                         const Corpus& corpus) {
    CheckpointReader reader(checkpoint_path);
    const auto& meta = reader.meta();
    const int version = meta.value("config_version", -1);
    if (version != kConfigVersion)
        fail("checkpoint: %s carries config_version %d, this build expects %d",
             checkpoint_path.c_str(), version, kConfigVersion);
    TrainConfig cfg = TrainConfig::from_json(meta.at("config"));
    auto trainer = std::unique_ptr<Trainer>(new Trainer(std::move(cfg), corpus, /*init=*/false));
    reader.load_module("gen", *trainer->gen_);
    if (trainer->cam_) reader.load_module("cam", *trainer->cam_);
    reader.load_module("disc", *trainer->disc_);
    reader.load_adam("opt/gen", *trainer->opt_g_);
    if (trainer->opt_cam_) reader.load_adam("opt/cam", *trainer->opt_cam_);
    reader.load_adam("opt/disc", *trainer->opt_d_);
    trainer->step_ = meta.at("step").get<int64_t>();
    trainer->sample_rng_.load_state(meta.at("sample_rng").get<std::string>());
    return trainer;
}

}  // namespace glyphsynth
