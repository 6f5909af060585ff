#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "glyphsynth/decomposition.hpp"
#include "glyphsynth/rng.hpp"

using namespace glyphsynth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("gs_decomp_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("vocab ids are dense, EOS reserved, round-trip byte-identical") {
    ComponentVocab vocab({"a", "b", "c"});
    CHECK(vocab.size() == 4);
    CHECK(vocab.eos_id() == 3);
    CHECK(vocab.id_of("a") == 0);
    CHECK(vocab.id_of("c") == 2);
    CHECK(vocab.id_of("zz") == -1);
    CHECK(vocab.symbol(3) == "EOS");

    TempDir tmp;
    const auto p = tmp.path / "vocab.txt";
    vocab.save(p.string());
    ComponentVocab loaded = ComponentVocab::load(p.string());
    CHECK(loaded.size() == vocab.size());
    const auto p2 = tmp.path / "vocab2.txt";
    loaded.save(p2.string());
    CHECK(read_file(p) == read_file(p2));

    CHECK_THROWS(ComponentVocab({"a", "a"}));
}

TEST_CASE("table parsing: single component, repeats, operators dropped") {
    TempDir tmp;
    const auto p = tmp.path / "table.tsv";
    // IDS operator U+2FF0 (\xE2\xBF\xB0) must be dropped
    write_file(p, "X\ta\nY\ta b a\nZ\t\xE2\xBF\xB0 b c\n");
    ComponentVocab vocab({"a", "b", "c"});
    DecompositionTable table = DecompositionTable::load(p.string(), vocab);
    CHECK(table.size() == 3);
    CHECK(table.decompose("X").ids == std::vector<int>{0});
    CHECK(table.decompose("Y").ids == std::vector<int>{0, 1, 0});
    CHECK(table.decompose("Z").ids == std::vector<int>{1, 2});
}

TEST_CASE("table errors: unknown symbol names line, duplicates, missing char") {
    TempDir tmp;
    ComponentVocab vocab({"a", "b"});

    const auto bad = tmp.path / "bad.tsv";
    write_file(bad, "X\ta\nY\tq\n");
    try {
        DecompositionTable::load(bad.string(), vocab);
        FAIL("expected parse error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find(":2") != std::string::npos);  // line number reported
        CHECK(msg.find("q") != std::string::npos);
    }

    const auto dup = tmp.path / "dup.tsv";
    write_file(dup, "X\ta\nX\tb\n");
    CHECK_THROWS_AS(DecompositionTable::load(dup.string(), vocab), Error);

    const auto ok = tmp.path / "ok.tsv";
    write_file(ok, "X\ta\n");
    DecompositionTable table = DecompositionTable::load(ok.string(), vocab);
    CHECK_THROWS_AS(table.decompose("absent"), Error);
}

TEST_CASE("10k-line table round-trips against an independent reference parser") {
    TempDir tmp;
    Rng rng(99);
    std::vector<std::string> syms;
    for (int i = 0; i < 50; ++i) syms.push_back("s" + std::to_string(i));
    ComponentVocab vocab(syms);

    const auto p = tmp.path / "big.tsv";
    {
        std::ofstream out(p);
        for (int c = 0; c < 10000; ++c) {
            out << "ch" << c << '\t';
            const int t = 1 + rng.index(4);
            for (int k = 0; k < t; ++k) {
                out << "s" << rng.index(50);
                if (k + 1 < t) out << ' ';
            }
            out << '\n';
        }
    }
    DecompositionTable table = DecompositionTable::load(p.string(), vocab);
    REQUIRE(table.size() == 10000);

    // Independent line-by-line reference parse.
    std::ifstream in(p);
    std::string line;
    int checked = 0;
    while (std::getline(in, line)) {
        const size_t tab = line.find('\t');
        const std::string ch = line.substr(0, tab);
        std::istringstream rest(line.substr(tab + 1));
        std::vector<int> ids;
        std::string tok;
        while (rest >> tok) ids.push_back(std::stoi(tok.substr(1)));
        REQUIRE(table.decompose(ch).ids == ids);
        ++checked;
    }
    CHECK(checked == 10000);
}

TEST_CASE("pad_batch: placement, degenerate batch, mixed lengths vs scalar loop") {
    ComponentVocab vocab({"a", "b", "c"});
    const int eos = vocab.eos_id();

    PaddedBatch p1 = pad_batch({ComponentSequence{{0}}}, 3, eos);
    CHECK(p1.batch == 1);
    CHECK(p1.width == 4);
    CHECK(p1.ids == std::vector<int>{0, eos, eos, eos});
    CHECK(p1.lengths == std::vector<int>{1});

    PaddedBatch p0 = pad_batch({}, 3, eos);
    CHECK(p0.batch == 0);
    CHECK(p0.ids.empty());
    CHECK(p0.lengths.empty());

    std::vector<ComponentSequence> seqs = {ComponentSequence{{2}}, ComponentSequence{{0, 1, 2}}};
    PaddedBatch pm = pad_batch(seqs, 4, eos);
    // per-element reference loop
    for (size_t b = 0; b < seqs.size(); ++b)
        for (int t = 0; t < pm.width; ++t) {
            const int expected =
                t < seqs[b].length() ? seqs[b].ids[static_cast<size_t>(t)] : eos;
            CHECK(pm.ids[b * pm.width + t] == expected);
        }

    CHECK_THROWS_AS(pad_batch({ComponentSequence{{0, 1, 2}}}, 2, eos), Error);
}

TEST_CASE("property: pad then strip EOS recovers decompose(c) for every char") {
    TempDir tmp;
    Rng rng(7);
    ComponentVocab vocab({"a", "b", "c", "d"});
    const auto p = tmp.path / "t.tsv";
    {
        std::ofstream out(p);
        const char* names[4] = {"a", "b", "c", "d"};
        for (int c = 0; c < 200; ++c) {
            out << "u" << c << '\t';
            const int t = 1 + rng.index(4);
            for (int k = 0; k < t; ++k) out << names[rng.index(4)] << (k + 1 < t ? " " : "");
            out << '\n';
        }
    }
    DecompositionTable table = DecompositionTable::load(p.string(), vocab);
    for (const std::string& ch : table.characters()) {
        const ComponentSequence& ref = table.decompose(ch);
        PaddedBatch padded = pad_batch({ref}, 8, vocab.eos_id());
        std::vector<int> stripped;
        for (int t = 0; t < padded.width; ++t) {
            if (padded.ids[static_cast<size_t>(t)] == vocab.eos_id()) break;
            stripped.push_back(padded.ids[static_cast<size_t>(t)]);
        }
        REQUIRE(stripped == ref.ids);
        REQUIRE(padded.lengths[0] == ref.length());
    }
}
