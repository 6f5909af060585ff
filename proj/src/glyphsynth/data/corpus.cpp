#include "glyphsynth/data/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "glyphsynth/data/ttf.hpp"

namespace glyphsynth {

namespace fs = std::filesystem;
using json = nlohmann::json;

Corpus Corpus::load(const std::string& dir) {
    const fs::path root(dir);
    check(fs::exists(root / "meta" / "corpus.json"), "corpus: " + dir + " has no meta/corpus.json");

    Corpus c;
    {
        std::ifstream in(root / "meta" / "corpus.json");
        json meta = json::parse(in);
        check(meta.at("format_version").get<int>() == 1, "corpus: unsupported format_version");
        c.img_size_ = meta.at("img_size").get<int>();
        c.n_styles_ = meta.at("n_styles").get<int>();
        c.n_chars_ = meta.at("n_chars").get<int>();
        c.kind_ = meta.at("kind").get<std::string>();
        c.seed_ = meta.value("seed", 0ULL);
    }
    c.vocab_ = ComponentVocab::load((root / "meta" / "vocab.txt").string());
    c.table_ = DecompositionTable::load((root / "meta" / "decomposition.tsv").string(), c.vocab_);
    c.char_symbols_ = c.table_.characters();
    check(static_cast<int>(c.char_symbols_.size()) == c.n_chars_,
          "corpus: decomposition table size does not match n_chars");

    std::ifstream rec(root / "meta" / "records.tsv");
    check(static_cast<bool>(rec), "corpus: missing meta/records.tsv");
    std::string line;
    std::getline(rec, line);  // header
    while (std::getline(rec, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        int style_id, char_id;
        std::string rel;
        ss >> style_id >> char_id >> rel;
        check(static_cast<bool>(ss), "corpus: malformed records.tsv line: " + line);
        Rgb8Image img = read_png_rgb8((root / rel).string());
        check(img.width == c.img_size_ && img.height == c.img_size_,
              "corpus: image size mismatch in " + rel);
        const int64_t k = key(style_id, char_id);
        c.images_[k] = std::move(img.pixels);
        c.index_[k] = true;
    }
    check(!c.index_.empty(), "corpus: no records");

    if (fs::exists(root / "meta" / "boxes.tsv")) {
        std::ifstream box(root / "meta" / "boxes.tsv");
        std::getline(box, line);  // header
        while (std::getline(box, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            int style_id, char_id, t;
            Rect r;
            ss >> style_id >> char_id >> t >> r.x0 >> r.y0 >> r.x1 >> r.y1;
            check(static_cast<bool>(ss), "corpus: malformed boxes.tsv line: " + line);
            auto& v = c.boxes_[key(style_id, char_id)];
            check(static_cast<int>(v.size()) == t, "corpus: boxes.tsv out of order");
            v.push_back(r);
        }
    }
    return c;
}

const std::string& Corpus::char_symbol(int char_id) const {
    check(char_id >= 0 && char_id < n_chars_, "corpus: char_id out of range");
    return char_symbols_[static_cast<size_t>(char_id)];
}

const ComponentSequence& Corpus::components(int char_id) const {
    return table_.decompose(char_symbol(char_id));
}

bool Corpus::has(int style_id, int char_id) const {
    return index_.count(key(style_id, char_id)) != 0;
}

nn::Tensor Corpus::image(int style_id, int char_id) const {
    auto it = images_.find(key(style_id, char_id));
    if (it == images_.end())
        fail("corpus: no image for style %d char %d", style_id, char_id);
    const std::vector<uint8_t>& rgb = it->second;
    nn::Tensor t({3, img_size_, img_size_});
    const int hw = img_size_ * img_size_;
    for (int i = 0; i < hw; ++i)
        for (int ch = 0; ch < 3; ++ch)
            t[ch * hw + i] =
                static_cast<double>(rgb[static_cast<size_t>(i) * 3 + ch]) / 255.0 * 2.0 - 1.0;
    return t;
}

std::vector<Rect> Corpus::component_boxes(int style_id, int char_id) const {
    auto it = boxes_.find(key(style_id, char_id));
    return it == boxes_.end() ? std::vector<Rect>{} : it->second;
}

TrainingBatch sample_batch(const Corpus& corpus, const SamplerConfig& cfg, Rng& rng) {
    check(cfg.batch >= 1, "sample_batch: batch must be >= 1");
    check(corpus.record_count() > 0, "sample_batch: empty corpus");
    const std::vector<int>& styles = cfg.style_pool;
    const std::vector<int>& chars = cfg.char_pool;
    check(!styles.empty() && !chars.empty(), "sample_batch: empty style or char pool");

    if (!cfg.with_replacement) {
        const size_t pool = styles.size() * chars.size();
        if (static_cast<size_t>(cfg.batch) > pool)
            fail("sample_batch: batch %d exceeds pool of %zu records with replacement disabled",
                 cfg.batch, pool);
    }

    TrainingBatch out;
    std::vector<nn::Tensor> style_imgs, content_imgs, target_imgs;
    std::set<std::pair<int, int>> used;
    for (int b = 0; b < cfg.batch; ++b) {
        SampleRef sref;
        for (;;) {
            sref.style_id = styles[static_cast<size_t>(rng.index(static_cast<int>(styles.size())))];
            sref.char_id = chars[static_cast<size_t>(rng.index(static_cast<int>(chars.size())))];
            if (cfg.with_replacement || used.insert({sref.style_id, sref.char_id}).second) break;
        }
        const bool identity =
            cfg.p_idt < 0.0 ? (b == 0) : rng.bernoulli(std::min(1.0, cfg.p_idt));
        SampleRef cref;
        if (identity) {
            cref = sref;
        } else {
            cref.style_id = cfg.content_style;
            cref.char_id = chars[static_cast<size_t>(rng.index(static_cast<int>(chars.size())))];
        }
        out.style_refs.push_back(sref);
        out.content_refs.push_back(cref);
        out.style_labels.push_back(sref.style_id);
        out.style_components.push_back(corpus.components(sref.char_id));
        out.content_components.push_back(corpus.components(cref.char_id));
        out.identity.push_back(identity ? 1 : 0);
        style_imgs.push_back(corpus.image(sref.style_id, sref.char_id));
        content_imgs.push_back(corpus.image(cref.style_id, cref.char_id));
        if (cfg.paired_targets)
            target_imgs.push_back(corpus.image(sref.style_id, cref.char_id));
    }
    out.style_images = stack_images(style_imgs);
    out.content_images = stack_images(content_imgs);
    if (cfg.paired_targets) out.paired_targets = stack_images(target_imgs);
    return out;
}

void build_font_corpus(const FontCorpusSpec& spec, const std::string& out_dir) {
    check(!spec.font_paths.empty(), "build_font_corpus: no fonts given");
    check(spec.img_size >= 16, "build_font_corpus: img_size too small");

    ComponentVocab vocab = ComponentVocab::load(spec.vocab_file);
    DecompositionTable table = DecompositionTable::load(spec.decomposition_tsv, vocab);

    std::vector<std::string> chars;
    {
        std::ifstream in(spec.chars_file);
        check(static_cast<bool>(in), "build_font_corpus: cannot open " + spec.chars_file);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            check(table.contains(line), "build_font_corpus: character '" + line +
                                            "' missing from the decomposition table");
            chars.push_back(line);
        }
    }
    check(!chars.empty(), "build_font_corpus: empty character list");

    const fs::path root(out_dir);
    fs::create_directories(root / "meta");
    vocab.save((root / "meta" / "vocab.txt").string());
    {
        // Re-emit only the rendered subset, in rendering order.
        DecompositionTable subset;
        for (const std::string& ch : chars) subset.add(ch, table.decompose(ch));
        subset.save((root / "meta" / "decomposition.tsv").string(), vocab);
    }

    std::ofstream records_out(root / "meta" / "records.tsv");
    std::ofstream styles_out(root / "meta" / "styles.tsv");
    records_out << "style_id\tchar_id\tpath\n";
    styles_out << "style_id\tfont\n";
    for (size_t s = 0; s < spec.font_paths.size(); ++s) {
        TtfFont font = TtfFont::load(spec.font_paths[s]);
        styles_out << s << '\t' << spec.font_paths[s] << '\n';
        fs::create_directories(root / "images" / std::to_string(s));
        for (size_t c = 0; c < chars.size(); ++c) {
            const GlyphImage img = render_font_glyph(font, chars[c], spec.img_size);
            const std::string rel =
                "images/" + std::to_string(s) + "/" + std::to_string(c) + ".png";
            write_png_rgb8((root / rel).string(), image_to_rgb8(img.pixels));
            records_out << s << '\t' << c << '\t' << rel << '\n';
        }
    }

    std::ofstream meta_out(root / "meta" / "corpus.json");
    meta_out << "{\n"
             << "  \"format_version\": 1,\n"
             << "  \"kind\": \"font\",\n"
             << "  \"img_size\": " << spec.img_size << ",\n"
             << "  \"n_styles\": " << spec.font_paths.size() << ",\n"
             << "  \"n_chars\": " << chars.size() << ",\n"
             << "  \"seed\": 0\n"
             << "}\n";
}

}  // namespace glyphsynth
