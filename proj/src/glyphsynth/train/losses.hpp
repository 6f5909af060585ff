#pragma once

#include <optional>

#include "glyphsynth/model/cam.hpp"
#include "glyphsynth/model/discriminator.hpp"

namespace glyphsynth {

struct LossWeights {
    double lambda_dec = 0.1;
    double lambda_cnt = 10.0;
    double lambda_pix = 10.0;  // paired-L1 weight for the pixel-level ablation

    void validate() const {
        check(lambda_dec >= 0 && lambda_cnt >= 0 && lambda_pix >= 0,
              "LossWeights: weights must be non-negative");
    }
};

enum class GanForm { NonSaturating, Saturating };

// Every term is reduced by mean (over batch / pixels / steps); aggregates
// follow the three-party objectives. With all-zero logits each BCE component
// equals ln 2, so the D total is 2*(1+lambda_dec)*ln 2 under this convention.
struct LossReport {
    double adv_enc = 0, adv_dec = 0;        // D side, unweighted parts
    double adv_g_enc = 0, adv_g_dec = 0;    // G side
    double adv_g = 0;                       // adv_g_enc + lambda_dec * adv_g_dec
    double strc_cam = 0, sty_cam = 0, comp_cam = 0;
    double strc_g = 0, sty_g = 0, comp_g = 0;
    double idt = 0, cnt = 0, pix = 0;
    double l_d = 0, l_cam = 0, l_g = 0;

    bool all_finite() const;
    // line-delimited serialization: "<step>\t<term>\t<value>"
    std::vector<std::string> lines(int64_t step) const;
};

// Aggregation per the three displayed objectives (pure arithmetic; the same
// sums are formed as graph nodes inside the trainer).
double aggregate_d(double adv_enc, double adv_dec, double lambda_dec);
double aggregate_cam(double comp_cam, double strc_cam, double sty_cam);
double aggregate_g(double adv_g, double comp_g, double strc_g, double sty_g, double idt,
                   double cnt, double lambda_cnt);

// --- adversarial -----------------------------------------------------------
struct AdvLossD {
    nn::Var total;       // adv_enc + lambda_dec * adv_dec
    nn::Var enc, dec;    // unweighted parts (dec undefined without the head)
};
AdvLossD adv_loss_d(const DiscOutputs& real, const DiscOutputs& fake, double lambda_dec);

struct AdvLossG {
    nn::Var total;
    nn::Var enc, dec;
};
AdvLossG adv_loss_g(const DiscOutputs& fake, double lambda_dec, GanForm form);

// --- component-level -------------------------------------------------------

// Mean over steps (components + the EOS step) and batch of the per-step
// cross-entropy between rollout logits and the target ids.
nn::Var structure_retention_loss(const BatchRollout& rollout,
                                 const std::vector<ComponentSequence>& targets, int eos_id);

// CE(CLS(feat), w) plus, when `rollout` is given, one masked term per
// component step (EOS excluded); mean-per-term reduction.
nn::Var style_matching_loss(Cam& cam, const nn::Var& feat, const BatchRollout* rollout,
                            const std::vector<int>& style_ids);

// CAM side: real score map toward 1 plus masked fake maps toward 0 (this BCE
// form is the -L_comp the CAM minimizes). Fake features must already be
// detached from F/A by the caller so only D_comp trains on fakes.
struct CompRealismCam {
    nn::Var total;
};
CompRealismCam component_realism_loss_cam(Cam& cam, const nn::Var& feat_real,
                                          const nn::Var& feat_fake_detached,
                                          const BatchRollout& rollout_fake);

// G side: fool D_comp on every masked component patch.
nn::Var component_realism_loss_g(Cam& cam, const nn::Var& feat_fake,
                                 const BatchRollout& rollout_fake, GanForm form);

// --- pixel-level -----------------------------------------------------------

// Mean absolute error, restricted to identity slots when a mask is given;
// returns a zero constant when the mask has no support.
nn::Var identity_loss(const nn::Var& style_images, const nn::Var& generated,
                      const std::vector<uint8_t>* identity_mask = nullptr);

// ||X_c - E_c(G(I_s,I_c))||_1, final maps only.
nn::Var content_loss(const nn::Var& content_feature, const nn::Var& generated_content_feature);

// Paired L1 for the pixel-level supervision ablation.
nn::Var paired_l1_loss(const nn::Var& generated, const nn::Var& targets);

}  // namespace glyphsynth
