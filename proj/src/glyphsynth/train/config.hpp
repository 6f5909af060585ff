#pragma once

#include <array>
#include <string>

#include <nlohmann/json.hpp>

#include "glyphsynth/common.hpp"
#include "glyphsynth/model/cam.hpp"
#include "glyphsynth/model/discriminator.hpp"
#include "glyphsynth/model/generator.hpp"

namespace glyphsynth {

enum class SupervisionLevel { Pixel, Character, Component };
enum class CamAblation { Baseline, Strc, StrcSty, Full };

SupervisionLevel supervision_from_string(const std::string& s);
std::string to_string(SupervisionLevel s);
CamAblation cam_ablation_from_string(const std::string& s);
std::string to_string(CamAblation a);

// Defaults are the paper-scale recipe (128px, Adam(0.5,0.999) at 1e-4, batch
// 16, N(0,0.02) init, 40 constant epochs then linear decay to zero).
struct TrainConfig {
    // data
    std::string corpus_dir;
    int n_val_styles = 0;  // held-out styles from the top of the id range
    int n_val_chars = 0;   // held-out characters likewise
    int content_style = 0;
    double p_idt = -1.0;  // <0: one dedicated identity slot per batch

    // optimization
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int batch = 16;
    double init_std = 0.02;
    int epochs_total = 80;
    int epochs_constant = 40;  // decay starts after this epoch
    int steps_per_epoch = 0;   // 0: ceil(train records / batch)
    int max_steps = 0;         // 0: full schedule; otherwise a hard cap
    uint64_t seed = 1;
    double grad_clip = 0.0;  // global-norm clip; 0 disables

    // model
    int img_size = 128;
    int gen_ch = 64;
    int d_s = 256;
    int gen_blocks = 5;
    std::array<int, 5> cam_channels = {96, 128, 160, 256, 256};
    int cam_hidden = 256;
    int cam_embed = 256;
    std::array<int, 3> cls_channels = {256, 512, 512};
    std::array<int, 3> comp_channels = {128, 64, 16};
    int disc_ch = 16;
    int t_max = 24;

    // losses and ablation switches
    double lambda_dec = 0.1;
    double lambda_cnt = 10.0;
    double lambda_pix = 10.0;
    SupervisionLevel supervision = SupervisionLevel::Component;
    CamAblation cam_losses = CamAblation::Full;
    bool use_style_latent = true;
    bool use_dec_head = true;
    std::string g_loss_form = "nonsaturating";  // or "saturating"
    bool cam_bn_train_on_fake = true;

    // io
    std::string out_dir = "run";
    int log_every = 25;        // stderr echo cadence; the metrics log gets every step
    int checkpoint_every = 0;  // steps; 0 = once per epoch

    void validate() const;
    nlohmann::json to_json() const;
    // Strict: unknown keys are errors naming the key.
    static TrainConfig from_json(const nlohmann::json& j);
    static TrainConfig load(const std::string& path);
};

// Constant for `epochs_constant` epochs, then linear decay hitting zero at
// `epochs_total`.
double lr_for_epoch(int epoch, const TrainConfig& cfg);

// Model configs derived from a train config (shared by the trainer and the
// checkpoint-loading CLI paths).
GeneratorConfig make_generator_config(const TrainConfig& cfg);
CamConfig make_cam_config(const TrainConfig& cfg, int n_styles, int vocab_size);
DiscConfig make_disc_config(const TrainConfig& cfg);

}  // namespace glyphsynth
