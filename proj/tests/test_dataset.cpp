#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "glyphsynth/data/corpus.hpp"

using namespace glyphsynth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) {
        path = fs::temp_directory_path() / (std::string("gs_ds_") + tag + "_" +
                                            std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Order-independent content hash of a corpus directory (FNV over sorted
// relative paths + file bytes).
uint64_t dir_hash(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
    std::sort(files.begin(), files.end());
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const char* data, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            h ^= static_cast<uint8_t>(data[i]);
            h *= 1099511628211ULL;
        }
    };
    for (const fs::path& rel : files) {
        const std::string name = rel.string();
        mix(name.data(), name.size());
        std::ifstream in(root / rel, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string bytes = ss.str();
        mix(bytes.data(), bytes.size());
    }
    return h;
}

}  // namespace

TEST_CASE("synthetic corpus: labels exact, byte-stable, style/content separated") {
    SyntheticCorpusSpec spec;
    spec.n_styles = 3;
    spec.n_primitives = 10;
    spec.n_chars = 40;
    spec.img_size = 32;
    spec.seed = 11;

    TempDir a("a"), b("b");
    make_synthetic_corpus(spec, a.path.string());
    make_synthetic_corpus(spec, b.path.string());
    CHECK(dir_hash(a.path) == dir_hash(b.path));  // seed fixed -> byte stable

    Corpus corpus = Corpus::load(a.path.string());
    CHECK(corpus.n_styles() == 3);
    CHECK(corpus.n_chars() == 40);
    CHECK(corpus.img_size() == 32);
    CHECK(corpus.vocab().size() == 11);  // 10 primitives + EOS

    // component ground truth matches the generator's own assembly order
    const auto chars = synthetic_characters(spec);
    REQUIRE(static_cast<int>(chars.size()) == spec.n_chars);
    for (int c = 0; c < spec.n_chars; ++c)
        CHECK(corpus.components(c).ids == chars[static_cast<size_t>(c)].primitives);

    // images satisfy GlyphImage invariants
    for (int s = 0; s < 3; ++s)
        for (int c = 0; c < 5; ++c) {
            nn::Tensor img = corpus.image(s, c);
            CHECK(img.shape() == std::vector<int64_t>{3, 32, 32});
            double mn = 1e9, mx = -1e9;
            for (const double v : img) {
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            CHECK(mn >= -1.0);
            CHECK(mx <= 1.0);
        }

    // styles differing only in parameters share component tables but differ per-pixel
    nn::Tensor s0 = corpus.image(0, 7);
    nn::Tensor s1 = corpus.image(1, 7);
    double diff = 0;
    for (int64_t i = 0; i < s0.numel(); ++i) diff += std::fabs(s0[i] - s1[i]);
    CHECK(diff > 1.0);
    CHECK(corpus.components(7).ids == chars[7].primitives);

    // boxes present and ordered
    CHECK(corpus.component_boxes(0, 7).size() == chars[7].primitives.size());
}

TEST_CASE("synthetic corpus rejects bad parameters") {
    SyntheticCorpusSpec spec;
    spec.n_primitives = 2;  // below the documented minimum of 4
    TempDir t("bad");
    CHECK_THROWS_AS(make_synthetic_corpus(spec, t.path.string()), Error);

    SyntheticCorpusSpec huge;
    huge.n_primitives = 4;
    huge.n_chars = 100000;  // exceeds the 4-primitive combination space (4+32+64+256)
    CHECK_THROWS_AS(make_synthetic_corpus(huge, t.path.string()), Error);
}

TEST_CASE("sample_batch contracts") {
    SyntheticCorpusSpec spec;
    spec.n_styles = 4;
    spec.n_primitives = 8;
    spec.n_chars = 20;
    spec.img_size = 32;
    spec.seed = 5;
    TempDir t("sb");
    make_synthetic_corpus(spec, t.path.string());
    Corpus corpus = Corpus::load(t.path.string());

    SamplerConfig cfg;
    cfg.batch = 6;
    cfg.style_pool = {0, 1, 2, 3};
    cfg.char_pool.resize(20);
    for (int i = 0; i < 20; ++i) cfg.char_pool[static_cast<size_t>(i)] = i;

    Rng rng(3);
    TrainingBatch batch = sample_batch(corpus, cfg, rng);
    CHECK(batch.batch() == 6);
    CHECK(batch.style_images.shape() == std::vector<int64_t>{6, 3, 32, 32});
    CHECK(batch.content_images.shape() == std::vector<int64_t>{6, 3, 32, 32});
    // default: exactly one dedicated identity slot
    int n_id = 0;
    for (uint8_t f : batch.identity) n_id += f;
    CHECK(n_id == 1);
    // non-identity content comes from the source style
    for (int b = 0; b < 6; ++b)
        if (!batch.identity[static_cast<size_t>(b)])
            CHECK(batch.content_refs[static_cast<size_t>(b)].style_id == 0);

    // p_idt = 1 -> content side equals style side elementwise
    cfg.p_idt = 1.0;
    TrainingBatch all_id = sample_batch(corpus, cfg, rng);
    for (int64_t i = 0; i < all_id.style_images.numel(); ++i)
        CHECK(all_id.style_images[i] == all_id.content_images[i]);

    // B=1 degenerate
    cfg.p_idt = 0.0;
    cfg.batch = 1;
    TrainingBatch one = sample_batch(corpus, cfg, rng);
    CHECK(one.batch() == 1);

    // no-replacement overflow errors
    cfg.batch = 81;
    cfg.with_replacement = false;
    CHECK_THROWS_AS(sample_batch(corpus, cfg, rng), Error);

    // paired targets fetch (style label, content char)
    cfg.batch = 4;
    cfg.with_replacement = true;
    cfg.paired_targets = true;
    TrainingBatch paired = sample_batch(corpus, cfg, rng);
    REQUIRE(paired.paired_targets.defined());
    for (int b = 0; b < 4; ++b) {
        nn::Tensor expect = corpus.image(paired.style_labels[static_cast<size_t>(b)],
                                         paired.content_refs[static_cast<size_t>(b)].char_id);
        const int64_t chw = expect.numel();
        for (int64_t i = 0; i < chw; ++i)
            CHECK(paired.paired_targets[b * chw + i] == expect[i]);
    }
}

TEST_CASE("sampling is uniform and style/content draws are independent") {
    SyntheticCorpusSpec spec;
    spec.n_styles = 5;
    spec.n_primitives = 6;
    spec.n_chars = 10;
    spec.img_size = 32;
    spec.seed = 17;
    TempDir t("uni");
    make_synthetic_corpus(spec, t.path.string());
    Corpus corpus = Corpus::load(t.path.string());

    SamplerConfig cfg;
    cfg.batch = 10;
    cfg.p_idt = 0.0;  // identity slots excluded from the independence check
    for (int s = 0; s < 5; ++s) cfg.style_pool.push_back(s);
    for (int c = 0; c < 10; ++c) cfg.char_pool.push_back(c);

    Rng rng(23);
    const int draws = 10000;
    std::vector<int> style_counts(5, 0);
    std::vector<std::vector<int>> joint(10, std::vector<int>(10, 0));  // style char x content char
    std::vector<int> s_marg(10, 0), c_marg(10, 0);
    int total = 0;
    for (int it = 0; it < draws / cfg.batch; ++it) {
        TrainingBatch b = sample_batch(corpus, cfg, rng);
        for (int i = 0; i < b.batch(); ++i) {
            ++style_counts[static_cast<size_t>(b.style_refs[static_cast<size_t>(i)].style_id)];
            const int sc = b.style_refs[static_cast<size_t>(i)].char_id;
            const int cc = b.content_refs[static_cast<size_t>(i)].char_id;
            ++joint[static_cast<size_t>(sc)][static_cast<size_t>(cc)];
            ++s_marg[static_cast<size_t>(sc)];
            ++c_marg[static_cast<size_t>(cc)];
            ++total;
        }
    }
    // per-style frequency within 3 sigma of the multinomial expectation
    const double expect_style = static_cast<double>(total) / 5.0;
    const double sigma = std::sqrt(static_cast<double>(total) * (1.0 / 5.0) * (4.0 / 5.0));
    for (int s = 0; s < 5; ++s)
        CHECK(std::fabs(style_counts[static_cast<size_t>(s)] - expect_style) < 3.0 * sigma);

    // chi-square independence of (style char, content char): 81 dof, 3-sigma
    // threshold ~ 81 + 3*sqrt(162) ~ 119
    double chi2 = 0.0;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            const double expected = static_cast<double>(s_marg[static_cast<size_t>(i)]) *
                                    c_marg[static_cast<size_t>(j)] / total;
            const double d = joint[static_cast<size_t>(i)][static_cast<size_t>(j)] - expected;
            chi2 += d * d / std::max(expected, 1e-9);
        }
    CHECK(chi2 < 130.0);
}

TEST_CASE("corpus images round-trip through PNG exactly") {
    SyntheticCorpusSpec spec;
    spec.n_styles = 1;
    spec.n_primitives = 5;
    spec.n_chars = 3;
    spec.img_size = 32;
    spec.seed = 2;
    TempDir t("rt");
    make_synthetic_corpus(spec, t.path.string());

    // write -> read gives back identical bytes
    Rgb8Image img = read_png_rgb8((t.path / "images/0/1.png").string());
    const auto copy_path = (t.path / "copy.png").string();
    write_png_rgb8(copy_path, img);
    Rgb8Image img2 = read_png_rgb8(copy_path);
    REQUIRE(img.pixels.size() == img2.pixels.size());
    CHECK(img.pixels == img2.pixels);
}
