#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glyphsynth/model/generator.hpp"

using namespace glyphsynth;
using namespace glyphsynth::nn;

namespace {

Tensor random_images(int n, int size, Rng& rng) {
    Tensor t({n, 3, size, size});
    for (double& v : t) v = std::tanh(rng.gauss(0.0, 0.8));
    return t;
}

GeneratorConfig tiny_config(int img_size = 32, int ch = 8) {
    GeneratorConfig cfg;
    cfg.img_size = img_size;
    cfg.ch = ch;
    cfg.d_s = 16;
    return cfg;
}

}  // namespace

TEST_CASE("encode_style shapes and determinism at 128") {
    Rng rng(1);
    GeneratorConfig cfg;
    cfg.ch = 8;
    cfg.d_s = 32;
    Generator gen(cfg);
    init_gaussian(gen, 0.02, rng);
    gen.set_training(false);

    NoGradGuard ng;
    Tensor imgs = random_images(1, 128, rng);
    StyleBundle a = gen.encode_style(Var::constant(imgs));
    // total downsampling x32: 128 -> 4
    CHECK(a.feature_map.shape() == std::vector<int64_t>{1, cfg.enc_channels(4), 4, 4});
    CHECK(a.latent.shape() == std::vector<int64_t>{1, 32});

    StyleBundle b = gen.encode_style(Var::constant(imgs));
    for (int64_t i = 0; i < a.latent.val().numel(); ++i)
        CHECK(a.latent.val()[i] == b.latent.val()[i]);
    for (int64_t i = 0; i < a.feature_map.val().numel(); ++i)
        CHECK(a.feature_map.val()[i] == b.feature_map.val()[i]);

    // all-white vs all-black must not collapse to one latent at init
    StyleBundle white = gen.encode_style(Var::constant(Tensor::full({1, 3, 128, 128}, 1.0)));
    StyleBundle black = gen.encode_style(Var::constant(Tensor::full({1, 3, 128, 128}, -1.0)));
    double diff = 0.0;
    for (int64_t i = 0; i < white.latent.val().numel(); ++i)
        diff += std::fabs(white.latent.val()[i] - black.latent.val()[i]);
    CHECK(diff > 1e-8);

    CHECK_THROWS_AS(gen.encode_style(Var::constant(Tensor::zeros({1, 3, 64, 64}))), Error);
}

TEST_CASE("encode_content skip ladder at 128") {
    Rng rng(2);
    GeneratorConfig cfg;
    cfg.ch = 8;
    cfg.d_s = 16;
    Generator gen(cfg);
    init_gaussian(gen, 0.02, rng);
    NoGradGuard ng;
    ContentFeature f = gen.encode_content(Var::constant(random_images(2, 128, rng)));
    REQUIRE(f.skips.size() == 5);
    const int64_t dims[5] = {64, 32, 16, 8, 4};
    for (int i = 0; i < 5; ++i) {
        CHECK(f.skips[static_cast<size_t>(i)].shape()[2] == dims[i]);
        CHECK(f.skips[static_cast<size_t>(i)].shape()[3] == dims[i]);
    }
    // X_c spatial dims equal X_s spatial dims
    StyleBundle s = gen.encode_style(Var::constant(random_images(2, 128, rng)));
    CHECK(f.feature_map.shape()[2] == s.feature_map.shape()[2]);
    CHECK(f.feature_map.shape()[3] == s.feature_map.shape()[3]);
}

TEST_CASE("adain moment properties") {
    Rng rng(3);
    Tensor x({2, 4, 8, 8});
    for (double& v : x) v = rng.gauss(0.0, 2.5);

    // scale=1, bias=0: instance-normalized output
    Var y = adain(Var::constant(x), Var::constant(Tensor::full({2, 4}, 1.0)),
                  Var::constant(Tensor::zeros({2, 4})));
    const int64_t HW = 64;
    for (int64_t nc = 0; nc < 8; ++nc) {
        double mu = 0, var = 0;
        for (int64_t i = 0; i < HW; ++i) mu += y.val()[nc * HW + i];
        mu /= HW;
        for (int64_t i = 0; i < HW; ++i) {
            const double d = y.val()[nc * HW + i] - mu;
            var += d * d;
        }
        var /= HW;
        CHECK(std::fabs(mu) < 1e-10);
        CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-4);
    }

    // arbitrary scale/bias: mean b, std |s| within 1e-4
    Tensor scale({2, 4}), bias({2, 4});
    for (double& v : scale) v = rng.gauss(0.0, 1.5);
    for (double& v : bias) v = rng.gauss(0.0, 1.0);
    Var y2 = adain(Var::constant(x), Var::constant(scale), Var::constant(bias));
    for (int64_t nc = 0; nc < 8; ++nc) {
        double mu = 0, var = 0;
        for (int64_t i = 0; i < HW; ++i) mu += y2.val()[nc * HW + i];
        mu /= HW;
        for (int64_t i = 0; i < HW; ++i) {
            const double d = y2.val()[nc * HW + i] - mu;
            var += d * d;
        }
        var /= HW;
        CHECK(std::fabs(mu - bias[nc]) < 1e-9);
        CHECK(std::fabs(std::sqrt(var) - std::fabs(scale[nc])) < 1e-4);
    }

    // constant channel: sigma floored, output equals bias everywhere
    Tensor flat = Tensor::full({1, 2, 4, 4}, 3.7);
    Var y3 = adain(Var::constant(flat), Var::constant(Tensor::full({1, 2}, 2.0)),
                   Var::constant(Tensor::from({1, 2}, {0.5, -0.25})));
    for (int64_t i = 0; i < 16; ++i) {
        CHECK(y3.val()[i] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(y3.val()[16 + i] == doctest::Approx(-0.25).epsilon(1e-12));
    }
}

TEST_CASE("mix: contract, live skips, f_s gradient") {
    Rng rng(4);
    GeneratorConfig cfg = tiny_config();
    Generator gen(cfg);
    init_gaussian(gen, 0.02, rng);

    Tensor s_imgs = random_images(2, 32, rng);
    Tensor c_imgs = random_images(2, 32, rng);

    StyleBundle style = gen.encode_style(Var::constant(s_imgs));
    ContentFeature content = gen.encode_content(Var::constant(c_imgs));
    Var out = gen.mix(style.feature_map, content.feature_map, content.skips, style.latent);
    CHECK(out.shape() == std::vector<int64_t>{2, 3, 32, 32});
    for (const double v : out.val()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }

    // zeroing all skips must change the output (skips are live paths)
    std::vector<Var> zeroed;
    for (const Var& s : content.skips) zeroed.push_back(Var::constant(Tensor::zeros(s.shape())));
    Var out_zero =
        gen.mix(style.feature_map, content.feature_map, zeroed, style.latent);
    double diff = 0.0;
    for (int64_t i = 0; i < out.val().numel(); ++i)
        diff += std::fabs(out.val()[i] - out_zero.val()[i]);
    CHECK(diff > 1e-6);

    // gradient of output w.r.t. f_s: nonzero and matching finite differences.
    // The comparison runs at a moderate weight scale: at N(0,0.02) the
    // residual ladder leaves bottleneck variances far below the IN epsilon,
    // which makes the loss curvature ~1/eps^1.5 and finite differences
    // meaningless (the analytic side is exact regardless; see block-level
    // checks).
    Generator gen2(cfg);
    Rng rng2(44);
    init_gaussian(gen2, 0.25, rng2);
    StyleBundle style2 = gen2.encode_style(Var::constant(s_imgs));
    ContentFeature content2 = gen2.encode_content(Var::constant(c_imgs));
    Var f_s = Var::param(style2.latent.val().clone());
    auto build = [&] {
        return gen2.mix(style2.feature_map.detach(), content2.feature_map.detach(),
                        {content2.skips[0].detach(), content2.skips[1].detach(),
                         content2.skips[2].detach(), content2.skips[3].detach(),
                         content2.skips[4].detach()},
                        f_s);
    };
    Var mixed = build();
    Var loss = mean_all(mul(mixed, mixed));
    loss.backward();
    REQUIRE(f_s.has_grad());
    double gnorm = 0.0;
    for (int64_t i = 0; i < f_s.grad().numel(); ++i) gnorm += f_s.grad()[i] * f_s.grad()[i];
    CHECK(gnorm > 0.0);

    auto forward = [&] {
        NoGradGuard ng;
        Var m = build();
        return mean_all(mul(m, m)).item();
    };
    CHECK(gradcheck_max_rel_err(forward, {f_s}, rng, 16, 1e-6) < 1e-4);
}

TEST_CASE("generate: identity path, batch equals per-sample loop, determinism") {
    Rng rng(5);
    GeneratorConfig cfg = tiny_config();
    Generator gen(cfg);
    init_gaussian(gen, 0.02, rng);
    NoGradGuard ng;

    Tensor s_imgs = random_images(3, 32, rng);
    Tensor c_imgs = random_images(3, 32, rng);

    // identity-loss path defined and finite
    Var idt = gen.generate(Var::constant(s_imgs), Var::constant(s_imgs));
    for (const double v : idt.val()) CHECK(std::isfinite(v));

    Var batch_out = gen.generate(Var::constant(s_imgs), Var::constant(c_imgs));
    const int64_t chw = 3 * 32 * 32;
    for (int n = 0; n < 3; ++n) {
        Tensor s1({1, 3, 32, 32}), c1({1, 3, 32, 32});
        std::copy(s_imgs.data() + n * chw, s_imgs.data() + (n + 1) * chw, s1.data());
        std::copy(c_imgs.data() + n * chw, c_imgs.data() + (n + 1) * chw, c1.data());
        Var single = gen.generate(Var::constant(s1), Var::constant(c1));
        for (int64_t i = 0; i < chw; ++i)
            CHECK(std::fabs(single.val()[i] - batch_out.val()[n * chw + i]) < 1e-5);
    }

    // bitwise determinism of repeated evaluation
    Var again = gen.generate(Var::constant(s_imgs), Var::constant(c_imgs));
    for (int64_t i = 0; i < again.val().numel(); ++i)
        CHECK(again.val()[i] == batch_out.val()[i]);
}

TEST_CASE("shape algebra across supported sizes") {
    Rng rng(6);
    for (int img : {32, 64, 128}) {
        GeneratorConfig cfg = tiny_config(img, 4);
        Generator gen(cfg);
        init_gaussian(gen, 0.02, rng);
        NoGradGuard ng;
        Tensor imgs = random_images(1, img, rng);
        StyleBundle s = gen.encode_style(Var::constant(imgs));
        CHECK(s.feature_map.shape()[2] == img / 32);
        Var out = gen.generate(Var::constant(imgs), Var::constant(imgs));
        CHECK(out.shape() == std::vector<int64_t>{1, 3, img, img});
    }
    // invalid size rejected
    GeneratorConfig bad = tiny_config(48, 4);
    CHECK_THROWS_AS(Generator{bad}, Error);
}

TEST_CASE("style latent ablation flag removes AdaIN injection") {
    Rng rng(7);
    GeneratorConfig cfg = tiny_config();
    cfg.use_style_latent = false;
    Generator gen(cfg);
    init_gaussian(gen, 0.02, rng);
    NoGradGuard ng;
    Tensor s_imgs = random_images(1, 32, rng);
    Tensor c_imgs = random_images(1, 32, rng);
    StyleBundle style = gen.encode_style(Var::constant(s_imgs));
    ContentFeature content = gen.encode_content(Var::constant(c_imgs));
    // same mixer inputs but two different latents: output must be identical
    Var out1 = gen.mix(style.feature_map, content.feature_map, content.skips, style.latent);
    Tensor other = style.latent.val().clone();
    for (double& v : other) v += 1.0;
    Var out2 =
        gen.mix(style.feature_map, content.feature_map, content.skips, Var::constant(other));
    for (int64_t i = 0; i < out1.val().numel(); ++i) CHECK(out1.val()[i] == out2.val()[i]);
}
