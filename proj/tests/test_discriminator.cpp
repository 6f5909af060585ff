#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glyphsynth/model/discriminator.hpp"

using namespace glyphsynth;
using namespace glyphsynth::nn;

namespace {

Tensor random_images(int n, int size, Rng& rng) {
    Tensor t({n, 3, size, size});
    for (double& v : t) v = std::tanh(rng.gauss(0.0, 0.8));
    return t;
}

}  // namespace

TEST_CASE("discriminate: per-image logit and per-pixel map at 128") {
    Rng rng(1);
    DiscConfig cfg;
    cfg.ch = 4;
    UnetDiscriminator disc(cfg);
    init_gaussian(disc, 0.02, rng);
    NoGradGuard ng;
    DiscOutputs out = disc.discriminate(Var::constant(random_images(2, 128, rng)));
    CHECK(out.enc_logit.shape() == std::vector<int64_t>{2});
    CHECK(out.dec_logit_map.shape() == std::vector<int64_t>{2, 1, 128, 128});
    for (const double v : out.enc_logit.val()) CHECK(std::isfinite(v));
    for (const double v : out.dec_logit_map.val()) CHECK(std::isfinite(v));

    CHECK_THROWS_AS(disc.discriminate(Var::constant(Tensor::zeros({1, 3, 64, 64}))), Error);
}

TEST_CASE("decoder map depends on encoder skips") {
    Rng rng(2);
    DiscConfig cfg;
    cfg.img_size = 32;
    cfg.ch = 8;
    UnetDiscriminator disc(cfg);
    init_gaussian(disc, 0.02, rng);
    NoGradGuard ng;
    Var imgs = Var::constant(random_images(2, 32, rng));
    DiscOutputs with_skips = disc.discriminate(imgs);
    DiscOutputs without = disc.discriminate(imgs, /*zero_skips=*/true);
    double diff = 0.0;
    for (int64_t i = 0; i < with_skips.dec_logit_map.val().numel(); ++i)
        diff += std::fabs(with_skips.dec_logit_map.val()[i] - without.dec_logit_map.val()[i]);
    CHECK(diff > 1e-6);
    // encoder head unaffected by the skip path
    for (int64_t i = 0; i < 2; ++i)
        CHECK(with_skips.enc_logit.val()[i] == without.enc_logit.val()[i]);
}

TEST_CASE("input gradients finite and nonzero at init") {
    Rng rng(3);
    DiscConfig cfg;
    cfg.img_size = 32;
    cfg.ch = 6;
    UnetDiscriminator disc(cfg);
    init_gaussian(disc, 0.02, rng);
    Var imgs = Var::param(random_images(2, 32, rng));
    DiscOutputs out = disc.discriminate(imgs);
    Var loss = add(mean_all(out.enc_logit), mean_all(mul(out.dec_logit_map, out.dec_logit_map)));
    loss.backward();
    REQUIRE(imgs.has_grad());
    double norm = 0.0;
    for (int64_t i = 0; i < imgs.grad().numel(); ++i) {
        CHECK(std::isfinite(imgs.grad()[i]));
        norm += imgs.grad()[i] * imgs.grad()[i];
    }
    CHECK(norm > 0.0);

    // finite-difference spot check
    auto forward = [&] {
        NoGradGuard ng;
        DiscOutputs o = disc.discriminate(imgs);
        return add(mean_all(o.enc_logit), mean_all(mul(o.dec_logit_map, o.dec_logit_map))).item();
    };
    CHECK(gradcheck_max_rel_err(forward, {imgs}, rng, 10) < 1e-3);
}

TEST_CASE("encoder-only variant remains valid when the decoder head is removed") {
    Rng rng(4);
    DiscConfig cfg;
    cfg.img_size = 32;
    cfg.ch = 6;
    cfg.use_dec_head = false;
    UnetDiscriminator disc(cfg);
    init_gaussian(disc, 0.02, rng);
    NoGradGuard ng;
    DiscOutputs out = disc.discriminate(Var::constant(random_images(2, 32, rng)));
    CHECK(out.enc_logit.shape() == std::vector<int64_t>{2});
    CHECK_FALSE(out.dec_logit_map.defined());
}
