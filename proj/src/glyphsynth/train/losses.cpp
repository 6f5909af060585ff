#include "glyphsynth/train/losses.hpp"

#include <cmath>

namespace glyphsynth {

using namespace nn;

bool LossReport::all_finite() const {
    for (double v : {adv_enc, adv_dec, adv_g_enc, adv_g_dec, adv_g, strc_cam, sty_cam, comp_cam,
                     strc_g, sty_g, comp_g, idt, cnt, pix, l_d, l_cam, l_g})
        if (!std::isfinite(v)) return false;
    return true;
}

std::vector<std::string> LossReport::lines(int64_t step) const {
    auto fmt = [step](const char* name, double v) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%lld\t%s\t%.10g", static_cast<long long>(step), name, v);
        return std::string(buf);
    };
    return {fmt("adv_enc", adv_enc),   fmt("adv_dec", adv_dec),   fmt("adv_g_enc", adv_g_enc),
            fmt("adv_g_dec", adv_g_dec), fmt("adv_g", adv_g),     fmt("strc_cam", strc_cam),
            fmt("sty_cam", sty_cam),   fmt("comp_cam", comp_cam), fmt("strc_g", strc_g),
            fmt("sty_g", sty_g),       fmt("comp_g", comp_g),     fmt("idt", idt),
            fmt("cnt", cnt),           fmt("pix", pix),           fmt("L_D", l_d),
            fmt("L_CAM", l_cam),       fmt("L_G", l_g)};
}

double aggregate_d(double adv_enc, double adv_dec, double lambda_dec) {
    return adv_enc + lambda_dec * adv_dec;
}

double aggregate_cam(double comp_cam, double strc_cam, double sty_cam) {
    return comp_cam + strc_cam + sty_cam;
}

double aggregate_g(double adv_g, double comp_g, double strc_g, double sty_g, double idt,
                   double cnt, double lambda_cnt) {
    return adv_g + comp_g + strc_g + sty_g + idt + lambda_cnt * cnt;
}

AdvLossD adv_loss_d(const DiscOutputs& real, const DiscOutputs& fake, double lambda_dec) {
    check_finite(real.enc_logit.val(), "adv_loss_d real enc logits");
    check_finite(fake.enc_logit.val(), "adv_loss_d fake enc logits");
    AdvLossD out;
    out.enc = add(mean_all(bce_logits(real.enc_logit, 1.0)),
                  mean_all(bce_logits(fake.enc_logit, 0.0)));
    out.total = out.enc;
    if (real.dec_logit_map.defined()) {
        check_finite(real.dec_logit_map.val(), "adv_loss_d real dec logits");
        check_finite(fake.dec_logit_map.val(), "adv_loss_d fake dec logits");
        out.dec = add(mean_all(bce_logits(real.dec_logit_map, 1.0)),
                      mean_all(bce_logits(fake.dec_logit_map, 0.0)));
        out.total = add(out.total, mul_scalar(out.dec, lambda_dec));
    }
    return out;
}

AdvLossG adv_loss_g(const DiscOutputs& fake, double lambda_dec, GanForm form) {
    check_finite(fake.enc_logit.val(), "adv_loss_g enc logits");
    AdvLossG out;
    // Non-saturating: minimize -log D(fake) = BCE(z,1). Saturating (the
    // printed objective): minimize log(1-D(fake)) = -BCE(z,0).
    auto fool = [form](const Var& z) {
        return form == GanForm::NonSaturating ? mean_all(bce_logits(z, 1.0))
                                              : mul_scalar(mean_all(bce_logits(z, 0.0)), -1.0);
    };
    out.enc = fool(fake.enc_logit);
    out.total = out.enc;
    if (fake.dec_logit_map.defined()) {
        check_finite(fake.dec_logit_map.val(), "adv_loss_g dec logits");
        out.dec = fool(fake.dec_logit_map);
        out.total = add(out.total, mul_scalar(out.dec, lambda_dec));
    }
    return out;
}

namespace {

// Per-sample weights as a constant Var; w_i = active_i / norm_i.
Var step_weights(const std::vector<int>& lengths, int t, bool include_eos_step) {
    const int64_t B = static_cast<int64_t>(lengths.size());
    Tensor w({B});
    for (int64_t i = 0; i < B; ++i) {
        const int T = lengths[static_cast<size_t>(i)];
        const int active_steps = include_eos_step ? T + 1 : T;
        const bool active = t < active_steps;
        w[i] = active ? 1.0 / static_cast<double>(include_eos_step ? T + 1 : T) : 0.0;
    }
    return Var::constant(w);
}

}  // namespace

Var structure_retention_loss(const BatchRollout& rollout,
                             const std::vector<ComponentSequence>& targets, int eos_id) {
    const int B = static_cast<int>(targets.size());
    check(B > 0, "structure_retention_loss: empty batch");
    check(static_cast<int>(rollout.lengths.size()) == B,
          "structure_retention_loss: rollout/target batch mismatch");
    for (int i = 0; i < B; ++i)
        check(rollout.lengths[static_cast<size_t>(i)] ==
                  targets[static_cast<size_t>(i)].length(),
              "structure_retention_loss: rollout/target length mismatch");

    Var total;
    for (int t = 0; t < rollout.steps(); ++t) {
        std::vector<int> step_targets;
        step_targets.reserve(static_cast<size_t>(B));
        for (const ComponentSequence& tgt : targets)
            step_targets.push_back(t < tgt.length() ? tgt.ids[static_cast<size_t>(t)] : eos_id);
        Var ce = cross_entropy_rows(rollout.logits[static_cast<size_t>(t)], step_targets);
        Var contrib = sum_all(mul(ce, step_weights(rollout.lengths, t, /*include_eos=*/true)));
        total = total.defined() ? add(total, contrib) : contrib;
    }
    return mul_scalar(total, 1.0 / static_cast<double>(B));
}

Var style_matching_loss(Cam& cam, const Var& feat, const BatchRollout* rollout,
                        const std::vector<int>& style_ids) {
    const int B = static_cast<int>(style_ids.size());
    check(B > 0 && feat.val().size(0) == B, "style_matching_loss: batch mismatch");
    const int n_styles = cam.config().n_styles;
    for (int w : style_ids)
        if (w < 0 || w >= n_styles)
            fail("style_matching_loss: style id %d out of range (n_styles=%d)", w, n_styles);

    if (rollout == nullptr) {
        // image-level only (ablation baseline)
        return mean_all(cross_entropy_rows(cam.classify_style(feat), style_ids));
    }

    // whole-image term weighted 1/(T_i+1) per sample
    Tensor whole_w({static_cast<int64_t>(B)});
    for (int i = 0; i < B; ++i)
        whole_w[i] = 1.0 / (rollout->lengths[static_cast<size_t>(i)] + 1.0);
    Var total = sum_all(mul(cross_entropy_rows(cam.classify_style(feat), style_ids),
                            Var::constant(whole_w)));

    // one masked term per component step; the EOS step has no region
    for (int t = 0; t < rollout->steps(); ++t) {
        bool any = false;
        Tensor w({static_cast<int64_t>(B)});
        for (int i = 0; i < B; ++i) {
            const int T = rollout->lengths[static_cast<size_t>(i)];
            w[i] = t < T ? 1.0 / (T + 1.0) : 0.0;
            any = any || t < T;
        }
        if (!any) break;
        Var masked = mask_features(feat, rollout->alphas[static_cast<size_t>(t)]);
        Var ce = cross_entropy_rows(cam.classify_style(masked), style_ids);
        total = add(total, sum_all(mul(ce, Var::constant(w))));
    }
    return mul_scalar(total, 1.0 / static_cast<double>(B));
}

CompRealismCam component_realism_loss_cam(Cam& cam, const Var& feat_real,
                                          const Var& feat_fake_detached,
                                          const BatchRollout& rollout_fake) {
    check(!feat_fake_detached.requires_grad(),
          "component_realism_loss_cam: fake features must be detached from F/A");
    Var real_term = mean_all(bce_logits(cam.discriminate_component(feat_real), 1.0));

    int64_t n_terms = 0;
    for (int len : rollout_fake.lengths) n_terms += len;
    if (n_terms == 0) return {real_term};  // no fake components: real term remains

    const int B = static_cast<int>(rollout_fake.lengths.size());
    Var fake_acc;
    for (int t = 0; t < rollout_fake.steps(); ++t) {
        bool any = false;
        Tensor w({static_cast<int64_t>(B)});
        for (int i = 0; i < B; ++i) {
            const bool active = t < rollout_fake.lengths[static_cast<size_t>(i)];
            w[i] = active ? 1.0 : 0.0;
            any = any || active;
        }
        if (!any) break;
        Var masked = mask_features(feat_fake_detached,
                                   rollout_fake.alphas[static_cast<size_t>(t)].detach());
        Var per_map = mean_per_sample(bce_logits(cam.discriminate_component(masked), 0.0));
        Var contrib = sum_all(mul(per_map, Var::constant(w)));
        fake_acc = fake_acc.defined() ? add(fake_acc, contrib) : contrib;
    }
    Var fake_term = mul_scalar(fake_acc, 1.0 / static_cast<double>(n_terms));
    return {add(real_term, fake_term)};
}

Var component_realism_loss_g(Cam& cam, const Var& feat_fake, const BatchRollout& rollout_fake,
                             GanForm form) {
    int64_t n_terms = 0;
    for (int len : rollout_fake.lengths) n_terms += len;
    if (n_terms == 0) return Var::constant(Tensor::scalar(0.0));

    const int B = static_cast<int>(rollout_fake.lengths.size());
    Var acc;
    for (int t = 0; t < rollout_fake.steps(); ++t) {
        bool any = false;
        Tensor w({static_cast<int64_t>(B)});
        for (int i = 0; i < B; ++i) {
            const bool active = t < rollout_fake.lengths[static_cast<size_t>(i)];
            w[i] = active ? 1.0 : 0.0;
            any = any || active;
        }
        if (!any) break;
        Var masked = mask_features(feat_fake, rollout_fake.alphas[static_cast<size_t>(t)]);
        Var scores = cam.discriminate_component(masked);
        Var per_map = form == GanForm::NonSaturating
                          ? mean_per_sample(bce_logits(scores, 1.0))
                          : mul_scalar(mean_per_sample(bce_logits(scores, 0.0)), -1.0);
        Var contrib = sum_all(mul(per_map, Var::constant(w)));
        acc = acc.defined() ? add(acc, contrib) : contrib;
    }
    return mul_scalar(acc, 1.0 / static_cast<double>(n_terms));
}

Var identity_loss(const Var& style_images, const Var& generated,
                  const std::vector<uint8_t>* identity_mask) {
    check(style_images.val().same_shape(generated.val()), "identity_loss: shape mismatch");
    Var per_sample = mean_per_sample(abs_op(sub(style_images, generated)));
    if (identity_mask == nullptr) return mean_all(per_sample);
    const int64_t B = per_sample.val().numel();
    check(static_cast<int64_t>(identity_mask->size()) == B, "identity_loss: mask size mismatch");
    int64_t support = 0;
    Tensor w({B});
    for (int64_t i = 0; i < B; ++i) {
        w[i] = (*identity_mask)[static_cast<size_t>(i)] ? 1.0 : 0.0;
        support += w[i] > 0 ? 1 : 0;
    }
    if (support == 0) return Var::constant(Tensor::scalar(0.0));
    return mul_scalar(sum_all(mul(per_sample, Var::constant(w))),
                      1.0 / static_cast<double>(support));
}

Var content_loss(const Var& content_feature, const Var& generated_content_feature) {
    check(content_feature.val().same_shape(generated_content_feature.val()),
          "content_loss: shape mismatch");
    return mean_all(abs_op(sub(content_feature, generated_content_feature)));
}

Var paired_l1_loss(const Var& generated, const Var& targets) {
    check(generated.val().same_shape(targets.val()), "paired_l1_loss: shape mismatch");
    return mean_all(abs_op(sub(generated, targets)));
}

}  // namespace glyphsynth
