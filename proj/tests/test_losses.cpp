#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glyphsynth/train/losses.hpp"

using namespace glyphsynth;
using namespace glyphsynth::nn;

namespace {

CamConfig small_cam(int n_styles = 4, int vocab = 9) {
    CamConfig cfg;
    cfg.img_size = 32;
    cfg.channels = {8, 10, 12, 16, 16};
    cfg.hidden = 12;
    cfg.embed = 8;
    cfg.n_styles = n_styles;
    cfg.vocab_size = vocab;
    cfg.t_max = 6;
    cfg.cls_channels = {12, 16, 16};
    cfg.comp_channels = {12, 8, 8};
    return cfg;
}

Tensor random_images(int n, int size, Rng& rng) {
    Tensor t({n, 3, size, size});
    for (double& v : t) v = std::tanh(rng.gauss(0.0, 0.8));
    return t;
}

// Builds a rollout with externally chosen logits/alphas (loss-level oracle
// fixture, no decoder involved).
BatchRollout fixed_rollout(const std::vector<ComponentSequence>& targets, int vocab, int L,
                           double logit_value) {
    BatchRollout roll;
    int max_t = 0;
    for (const auto& t : targets) {
        roll.lengths.push_back(t.length());
        max_t = std::max(max_t, t.length());
    }
    const int B = static_cast<int>(targets.size());
    for (int t = 0; t < max_t + 1; ++t) {
        roll.logits.push_back(Var::constant(Tensor::full({B, vocab}, logit_value)));
        roll.alphas.push_back(Var::constant(Tensor::full({B, L}, 1.0 / L)));
    }
    return roll;
}

}  // namespace

TEST_CASE("adversarial loss: analytic zero-logit value, confident limit, lambda_dec=0") {
    const int B = 3, S = 16;
    DiscOutputs zero_real{Var::constant(Tensor::zeros({B})),
                          Var::constant(Tensor::zeros({B, 1, S, S}))};
    DiscOutputs zero_fake{Var::constant(Tensor::zeros({B})),
                          Var::constant(Tensor::zeros({B, 1, S, S}))};
    const double ln2 = std::log(2.0);

    AdvLossD d = adv_loss_d(zero_real, zero_fake, 0.1);
    // each of the four BCE components is ln 2
    CHECK(d.enc.item() == doctest::Approx(2 * ln2).epsilon(1e-9));
    CHECK(d.dec.item() == doctest::Approx(2 * ln2).epsilon(1e-9));
    // documented convention: total = 2*(1+lambda_dec)*ln 2
    CHECK(d.total.item() == doctest::Approx(2 * (1 + 0.1) * ln2).epsilon(1e-9));

    // perfectly confident D (logits clipped at +-20) -> loss ~ 0
    DiscOutputs conf_real{Var::constant(Tensor::full({B}, 25.0)),
                          Var::constant(Tensor::full({B, 1, S, S}, 25.0))};
    DiscOutputs conf_fake{Var::constant(Tensor::full({B}, -25.0)),
                          Var::constant(Tensor::full({B, 1, S, S}, -25.0))};
    CHECK(adv_loss_d(conf_real, conf_fake, 0.1).total.item() < 1e-7);

    // lambda_dec = 0 equals the encoder-only loss
    AdvLossD d0 = adv_loss_d(zero_real, zero_fake, 0.0);
    CHECK(d0.total.item() == doctest::Approx(d0.enc.item()).epsilon(1e-12));

    // encoder-only discriminator (no dec head)
    DiscOutputs enc_only_r{Var::constant(Tensor::zeros({B})), Var()};
    DiscOutputs enc_only_f{Var::constant(Tensor::zeros({B})), Var()};
    CHECK(adv_loss_d(enc_only_r, enc_only_f, 0.1).total.item() ==
          doctest::Approx(2 * ln2).epsilon(1e-9));

    // G side: zero logits give ln2 per component; saturating form is -ln2
    AdvLossG g = adv_loss_g(zero_fake, 0.1, GanForm::NonSaturating);
    CHECK(g.total.item() == doctest::Approx((1 + 0.1) * ln2).epsilon(1e-9));
    AdvLossG gs = adv_loss_g(zero_fake, 0.1, GanForm::Saturating);
    CHECK(gs.total.item() == doctest::Approx(-(1 + 0.1) * ln2).epsilon(1e-9));

    // non-finite logits rejected
    DiscOutputs bad{Var::constant(Tensor::full({B}, std::nan(""))), Var()};
    CHECK_THROWS_AS(adv_loss_d(bad, zero_fake, 0.1), Error);
}

TEST_CASE("structure retention: analytic uniform value, zero at one-hot, mismatch error") {
    const int V = 386;  // incl. EOS
    std::vector<ComponentSequence> targets = {ComponentSequence{{3, 7}}, ComponentSequence{{1}}};
    BatchRollout roll = fixed_rollout(targets, V, 4, 0.0);
    Var loss = structure_retention_loss(roll, targets, V - 1);
    // uniform logits -> ln V per step, mean over steps and batch keeps ln V
    CHECK(loss.item() == doctest::Approx(std::log(386.0)).epsilon(1e-9));

    // one-hot correct logits -> 0 (up to the softmax tail at +-20-ish logits)
    BatchRollout hot;
    hot.lengths = {2, 1};
    for (int t = 0; t < 3; ++t) {
        Tensor logits = Tensor::zeros({2, V});
        const int eos = V - 1;
        const int tgt0 = t < 2 ? targets[0].ids[static_cast<size_t>(t)] : eos;
        const int tgt1 = t < 1 ? targets[1].ids[static_cast<size_t>(t)] : eos;
        logits.at(0, tgt0) = 50.0;
        logits.at(1, tgt1) = 50.0;
        hot.logits.push_back(Var::constant(logits));
        hot.alphas.push_back(Var::constant(Tensor::full({2, 4}, 0.25)));
    }
    CHECK(structure_retention_loss(hot, targets, V - 1).item() < 1e-9);

    // length mismatch is an error
    BatchRollout bad = fixed_rollout({ComponentSequence{{3}}}, V, 4, 0.0);
    CHECK_THROWS_AS(structure_retention_loss(bad, targets, V - 1), Error);
}

TEST_CASE("style matching: uniform-logit value is ln S under mean-per-term reduction") {
    Rng rng(3);
    const int S = 4;
    CamConfig cfg = small_cam(S);
    Cam cam(cfg);
    init_gaussian(cam, 0.02, rng);
    cam.set_training(false);

    // Zero the classifier so logits are exactly uniform regardless of input.
    std::vector<std::pair<std::string, Parameter*>> named;
    cam.named_parameters("", named);
    for (auto& [name, p] : named)
        if (name.rfind("cls.", 0) == 0) p->var.val().fill(0.0);

    Var feat = cam.encode_features(Var::constant(random_images(2, 32, rng)));
    std::vector<ComponentSequence> targets = {ComponentSequence{{1, 2, 3}},
                                              ComponentSequence{{5}}};
    BatchRollout roll = cam.decoder().decode_teacher_forced(feat, targets);
    Var loss = style_matching_loss(cam, feat, &roll, {0, 2});
    // (T+1) terms each ln S, divided by T+1 -> ln S
    CHECK(loss.item() == doctest::Approx(std::log(static_cast<double>(S))).epsilon(1e-9));

    // T=1: exactly two terms (whole + one masked), still ln S
    std::vector<ComponentSequence> single = {ComponentSequence{{2}}, ComponentSequence{{4}}};
    BatchRollout roll1 = cam.decoder().decode_teacher_forced(feat, single);
    CHECK(style_matching_loss(cam, feat, &roll1, {1, 3}).item() ==
          doctest::Approx(std::log(static_cast<double>(S))).epsilon(1e-9));

    // image-level-only variant (ablation baseline)
    CHECK(style_matching_loss(cam, feat, nullptr, {0, 1}).item() ==
          doctest::Approx(std::log(static_cast<double>(S))).epsilon(1e-9));

    // style id out of range
    CHECK_THROWS_AS(style_matching_loss(cam, feat, &roll, {0, S}), Error);
}

TEST_CASE("component realism: zero-logit analytic value and empty-rollout degeneracy") {
    Rng rng(4);
    CamConfig cfg = small_cam();
    Cam cam(cfg);
    init_gaussian(cam, 0.02, rng);
    cam.set_training(false);

    // zero D_comp -> all score maps are exactly zero logits
    std::vector<std::pair<std::string, Parameter*>> named;
    cam.named_parameters("", named);
    for (auto& [name, p] : named)
        if (name.rfind("comp.", 0) == 0) p->var.val().fill(0.0);

    NoGradGuard ng;
    Var feat_real = cam.encode_features(Var::constant(random_images(2, 32, rng)));
    Var feat_fake = cam.encode_features(Var::constant(random_images(2, 32, rng)));
    std::vector<ComponentSequence> targets = {ComponentSequence{{1, 2}}, ComponentSequence{{3}}};
    BatchRollout roll = cam.decoder().decode_teacher_forced(feat_fake, targets);

    const double ln2 = std::log(2.0);
    CompRealismCam cam_side =
        component_realism_loss_cam(cam, feat_real, feat_fake.detach(), roll);
    // real term ln2 + fake mean ln2
    CHECK(cam_side.total.item() == doctest::Approx(2 * ln2).epsilon(1e-9));

    Var g_side = component_realism_loss_g(cam, feat_fake, roll, GanForm::NonSaturating);
    CHECK(g_side.item() == doctest::Approx(ln2).epsilon(1e-9));

    // degenerate: a rollout with no component steps leaves only the real term
    BatchRollout empty;
    empty.lengths = {0, 0};
    CompRealismCam real_only =
        component_realism_loss_cam(cam, feat_real, feat_fake.detach(), empty);
    CHECK(real_only.total.item() == doctest::Approx(ln2).epsilon(1e-9));
    CHECK(component_realism_loss_g(cam, feat_fake, empty, GanForm::NonSaturating).item() == 0.0);

    // uniform-alpha masking keeps everything finite
    CHECK(std::isfinite(cam_side.total.item()));
}

TEST_CASE("identity loss: zero at identity, analytic constant case, symmetry") {
    Rng rng(5);
    Tensor imgs = random_images(3, 16, rng);
    // exact identity mock -> 0
    CHECK(identity_loss(Var::constant(imgs), Var::constant(imgs.clone())).item() == 0.0);

    // constant-gray output vs image with known mean deviation
    Tensor gray = Tensor::zeros({1, 3, 4, 4});
    Tensor img({1, 3, 4, 4});
    double expected = 0.0;
    Rng r2(7);
    for (double& v : img) {
        v = std::tanh(r2.gauss());
        expected += std::fabs(v);
    }
    expected /= static_cast<double>(img.numel());
    CHECK(identity_loss(Var::constant(img), Var::constant(gray)).item() ==
          doctest::Approx(expected).epsilon(1e-12));

    // symmetric under channel permutation of both args
    Tensor a = random_images(1, 8, rng), b = random_images(1, 8, rng);
    Tensor ap({1, 3, 8, 8}), bp({1, 3, 8, 8});
    const int hw = 64;
    const int perm[3] = {2, 0, 1};
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < hw; ++i) {
            ap[c * hw + i] = a[perm[c] * hw + i];
            bp[c * hw + i] = b[perm[c] * hw + i];
        }
    CHECK(identity_loss(Var::constant(a), Var::constant(b)).item() ==
          doctest::Approx(identity_loss(Var::constant(ap), Var::constant(bp)).item())
              .epsilon(1e-12));

    // masked variant: no support -> exact zero
    std::vector<uint8_t> mask = {0, 0, 0};
    CHECK(identity_loss(Var::constant(imgs), Var::constant(random_images(3, 16, rng)), &mask)
              .item() == 0.0);
    // single identity slot measures only that slot
    std::vector<uint8_t> one = {0, 1, 0};
    Tensor fake = imgs.clone();
    const int64_t chw = 3 * 16 * 16;
    double dev = 0.0;
    for (int64_t i = 0; i < chw; ++i) {
        fake[chw + i] += 0.25;
        dev += 0.25;
    }
    // slots 0 and 2 corrupted arbitrarily; they must not contribute
    for (int64_t i = 0; i < chw; ++i) fake[i] += 1.0;
    CHECK(identity_loss(Var::constant(imgs), Var::constant(fake), &one).item() ==
          doctest::Approx(dev / chw).epsilon(1e-9));
}

TEST_CASE("content loss: zero at identity, scalar oracle, homogeneity") {
    Rng rng(6);
    Tensor a({2, 8, 2, 2}), b({2, 8, 2, 2});
    for (double& v : a) v = rng.gauss();
    for (double& v : b) v = rng.gauss();

    CHECK(content_loss(Var::constant(a), Var::constant(a.clone())).item() == 0.0);

    double ref = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) ref += std::fabs(a[i] - b[i]);
    ref /= static_cast<double>(a.numel());
    CHECK(content_loss(Var::constant(a), Var::constant(b)).item() ==
          doctest::Approx(ref).epsilon(1e-12));

    // scaling both features by c scales the loss by |c|
    Tensor ac = a.clone(), bc = b.clone();
    for (double& v : ac) v *= -2.5;
    for (double& v : bc) v *= -2.5;
    CHECK(content_loss(Var::constant(ac), Var::constant(bc)).item() ==
          doctest::Approx(2.5 * ref).epsilon(1e-12));
}

TEST_CASE("aggregation arithmetic (Eq.17/18 shape)") {
    // all parts zero -> all aggregates zero
    CHECK(aggregate_d(0, 0, 0.1) == 0.0);
    CHECK(aggregate_cam(0, 0, 0) == 0.0);
    CHECK(aggregate_g(0, 0, 0, 0, 0, 0, 10.0) == 0.0);

    // unit parts with lambda_cnt = 10 -> exactly 15
    CHECK(aggregate_g(1, 1, 1, 1, 1, 1, 10.0) == 15.0);

    CHECK(aggregate_d(1.0, 1.0, 0.1) == doctest::Approx(1.1));
    CHECK(aggregate_cam(0.5, 0.25, 0.25) == doctest::Approx(1.0));

    LossReport report;
    report.l_g = aggregate_g(1, 1, 1, 1, 1, 1, 10.0);
    CHECK(report.lines(7).size() == 17);
    for (const std::string& line : report.lines(7)) CHECK(line.rfind("7\t", 0) == 0);
}

TEST_CASE("gradient routing: CAM comp loss trains D_comp only on fakes") {
    Rng rng(8);
    CamConfig cfg = small_cam();
    Cam cam(cfg);
    init_gaussian(cam, 0.05, rng);
    cam.set_training(false);

    Tensor real = random_images(2, 32, rng);
    Tensor fake = random_images(2, 32, rng);
    std::vector<ComponentSequence> targets = {ComponentSequence{{1}}, ComponentSequence{{2, 3}}};

    Var feat_real = cam.encode_features(Var::constant(real));
    Var feat_fake_detached;
    BatchRollout roll_fake;
    {
        NoGradGuard ng;
        feat_fake_detached = cam.encode_features(Var::constant(fake));
        roll_fake = cam.decoder().decode_teacher_forced(feat_fake_detached, targets);
    }

    // Only the fake term: encoder (F) and decoder (A) must receive no gradient.
    CompRealismCam with_real =
        component_realism_loss_cam(cam, feat_real.detach(), feat_fake_detached, roll_fake);
    with_real.total.backward();
    std::vector<std::pair<std::string, Parameter*>> named;
    cam.named_parameters("", named);
    for (auto& [name, p] : named) {
        const bool is_dcomp = name.rfind("comp.", 0) == 0;
        if (is_dcomp) continue;
        if (p->var.has_grad())
            for (int64_t i = 0; i < p->var.grad().numel(); ++i)
                CHECK(p->var.grad()[i] == 0.0);
    }
    // and D_comp does receive gradient
    double dcomp_norm = 0.0;
    for (auto& [name, p] : named)
        if (name.rfind("comp.", 0) == 0 && p->var.has_grad())
            for (int64_t i = 0; i < p->var.grad().numel(); ++i)
                dcomp_norm += p->var.grad()[i] * p->var.grad()[i];
    CHECK(dcomp_norm > 0.0);
}
