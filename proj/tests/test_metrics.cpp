#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "glyphsynth/eval/metrics.hpp"
#include "glyphsynth/eval/visualize.hpp"
#include "glyphsynth/rng.hpp"

using namespace glyphsynth;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

Tensor random_image(int size, Rng& rng) {
    Tensor t({3, size, size});
    for (double& v : t) v = std::tanh(rng.gauss(0.0, 0.7));
    return t;
}

// Independent SSIM reference: direct nested loops over valid 11x11 windows.
double ssim_reference(const Tensor& a, const Tensor& b) {
    const int H = static_cast<int>(a.size(1)), W = static_cast<int>(a.size(2));
    const double c1 = std::pow(0.01 * 2.0, 2), c2 = std::pow(0.03 * 2.0, 2);
    double taps[11];
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
        const double x = i - 5.0;
        taps[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
        sum += taps[i];
    }
    for (double& t : taps) t /= sum;

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double* x = a.data() + static_cast<int64_t>(c) * H * W;
        const double* y = b.data() + static_cast<int64_t>(c) * H * W;
        double acc = 0.0;
        int count = 0;
        for (int wy = 0; wy + 11 <= H; ++wy)
            for (int wx = 0; wx + 11 <= W; ++wx) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        const double w2 = taps[i] * taps[j];
                        const double xv = x[(wy + i) * W + wx + j] + 1.0;  // [0,2] domain
                        const double yv = y[(wy + i) * W + wx + j] + 1.0;
                        mx += w2 * xv;
                        my += w2 * yv;
                        mxx += w2 * xv * xv;
                        myy += w2 * yv * yv;
                        mxy += w2 * xv * yv;
                    }
                const double sx = mxx - mx * mx, sy = myy - my * my, sxy = mxy - mx * my;
                acc += ((2 * mx * my + c1) * (2 * sxy + c2)) /
                       ((mx * mx + my * my + c1) * (sx + sy + c2));
                ++count;
            }
        total += acc / count;
    }
    return total / 3.0;
}

}  // namespace

TEST_CASE("ssim: identity is exactly 1, sign flips below zero, matches reference") {
    Rng rng(11);
    for (int i = 0; i < 3; ++i) {
        Tensor x = random_image(32, rng);
        CHECK(ssim(x, x) == 1.0);  // bitwise-identical numerator/denominator

        // negated non-constant image is structurally anti-correlated
        Tensor neg = x.clone();
        for (double& v : neg) v = -v;
        CHECK(ssim(x, neg) < 0.0);
    }
    // 10 random pairs against the independent scalar oracle
    for (int i = 0; i < 10; ++i) {
        Tensor a = random_image(24, rng);
        Tensor b = random_image(24, rng);
        CHECK(std::fabs(ssim(a, b) - ssim_reference(a, b)) < 1e-4);
    }
    CHECK_THROWS_AS(ssim(random_image(24, rng), random_image(32, rng)), Error);
}

TEST_CASE("rmse: identity, extremes, scalar-loop oracle") {
    Rng rng(13);
    Tensor x = random_image(16, rng);
    CHECK(rmse(x, x) == 0.0);

    // all-black vs all-white in the [0,1] domain -> exactly 1
    Tensor black = Tensor::full({3, 8, 8}, -1.0);
    Tensor white = Tensor::full({3, 8, 8}, 1.0);
    CHECK(rmse(black, white) == doctest::Approx(1.0).epsilon(1e-12));

    Tensor a = random_image(16, rng), b = random_image(16, rng);
    double acc = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double da = (a[i] + 1.0) / 2.0 - (b[i] + 1.0) / 2.0;
        acc += da * da;
    }
    CHECK(std::fabs(rmse(a, b) - std::sqrt(acc / a.numel())) < 1e-7);
}

TEST_CASE("fid: identical sets, closed-form Gaussian case, symmetry, order invariance") {
    // construct feature sets with exact sample moments: mean mu, covariance I
    const int d = 6;
    auto exact_set = [&](double shift) {
        std::vector<std::vector<double>> out;
        const double a = std::sqrt((2.0 * d - 1.0) / 2.0);
        for (int i = 0; i < d; ++i) {
            std::vector<double> p(d, shift), m(d, shift);
            p[static_cast<size_t>(i)] += a;
            m[static_cast<size_t>(i)] -= a;
            out.push_back(p);
            out.push_back(m);
        }
        return out;
    };
    auto base = exact_set(0.0);
    CHECK(fid(base, base) == doctest::Approx(0.0).epsilon(1e-6));

    // means distance D apart, identity covariances -> FID = D^2
    const double shift = 0.75;
    auto shifted = exact_set(shift);
    const double expect = shift * shift * d;
    CHECK(fid(base, shifted) == doctest::Approx(expect).epsilon(1e-4));
    CHECK(fid(shifted, base) == doctest::Approx(expect).epsilon(1e-4));

    // sample order is irrelevant
    auto shuffled = shifted;
    std::swap(shuffled[0], shuffled[5]);
    std::swap(shuffled[2], shuffled[9]);
    CHECK(fid(base, shuffled) == doctest::Approx(fid(base, shifted)).epsilon(1e-9));

    CHECK_THROWS_AS(fid({{1.0}}, {{1.0}}), Error);  // too few samples
}

TEST_CASE("fid backbones: pool extractor dimension and determinism") {
    Rng rng(17);
    PoolExtractor pool(8);
    CHECK(pool.dim() == 64);
    Tensor img = random_image(32, rng);
    auto f1 = pool.extract(img);
    auto f2 = pool.extract(img);
    CHECK(f1 == f2);
    CHECK(static_cast<int>(f1.size()) == 64);
    CHECK(pool.name().find("pool") == 0);

    // distinct images produce distinct features
    auto f3 = pool.extract(random_image(32, rng));
    CHECK(f1 != f3);
}

TEST_CASE("metric report serialization carries ssim/rmse/fid keys") {
    MetricReport report;
    report.count = 5;
    report.ssim_mean = 0.812345;
    report.rmse_mean = 0.043210;
    report.fid_value = 1.25;
    report.fid_backbone = "pool8x8";
    const auto lines = report.key_values();
    REQUIRE(lines.size() == 5);
    CHECK(lines[1].rfind("ssim=", 0) == 0);
    CHECK(lines[2].rfind("rmse=", 0) == 0);
    CHECK(lines[3].rfind("fid=", 0) == 0);

    const fs::path p =
        fs::temp_directory_path() / ("gs_report_" + std::to_string(::getpid()) + ".txt");
    report.save(p.string());
    std::ifstream in(p);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(all.find("ssim=") != std::string::npos);
    CHECK(all.find("fid=") != std::string::npos);
    fs::remove(p);
}

TEST_CASE("grid renderer: geometry, missing target column, PNG round-trip") {
    Rng rng(19);
    const fs::path dir = fs::temp_directory_path() / ("gs_viz_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    std::vector<GridRow> rows;
    rows.push_back({{random_image(32, rng), random_image(32, rng), random_image(32, rng),
                     random_image(32, rng)}});
    rows.push_back({{random_image(32, rng), random_image(32, rng), random_image(32, rng)}});
    const std::string path = (dir / "grid.png").string();
    save_grid_png(rows, path, 2);

    Rgb8Image img = read_png_rgb8(path);
    CHECK(img.height == 2 * 32 + 2);  // N rows -> N*cell + separators
    CHECK(img.width == 4 * 32 + 3 * 2);

    // round-trip: file is valid PNG readable back to identical pixels
    const std::string copy = (dir / "copy.png").string();
    write_png_rgb8(copy, img);
    Rgb8Image img2 = read_png_rgb8(copy);
    CHECK(img.pixels == img2.pixels);
    fs::remove_all(dir);
}

TEST_CASE("attention overlay: panel count and heat argmax location") {
    Rng rng(23);
    const fs::path dir = fs::temp_directory_path() / ("gs_att_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    Tensor img = random_image(32, rng);

    // T-step rollout -> T+1 panels (incl. EOS step) plus the source panel
    std::vector<Tensor> alphas;
    std::vector<std::string> captions;
    for (int t = 0; t < 3; ++t) {
        Tensor a = Tensor::zeros({2, 2});
        a[t % 4] = 1.0;
        alphas.push_back(a);
        captions.push_back(t == 2 ? "EOS" : "p" + std::to_string(t));
    }
    const std::string path = (dir / "attn.png").string();
    save_attention_overlay(img, alphas, captions, 2, 2, path);
    Rgb8Image out = read_png_rgb8(path);
    CHECK(out.width == 4 * 32 + 3);  // source + 3 panels + separators
    CHECK(out.height == 32 + 10);

    // heatmap max location equals the argmax alpha cell center
    Tensor a = Tensor::zeros({2, 2});
    a[3] = 1.0;  // bottom-right cell
    auto [px, py] = heat_argmax_pixel(a, 2, 2, 32);
    CHECK(px == 16 + 8);
    CHECK(py == 16 + 8);
    fs::remove_all(dir);
}
