#include "glyphsynth/decomposition.hpp"

#include <fstream>
#include <sstream>

namespace glyphsynth {

ComponentVocab::ComponentVocab(std::vector<std::string> components)
    : components_(std::move(components)) {
    for (size_t i = 0; i < components_.size(); ++i) {
        check(!components_[i].empty(), "vocab: empty component symbol");
        auto [it, inserted] = index_.emplace(components_[i], static_cast<int>(i));
        if (!inserted) fail("vocab: duplicate component symbol '%s'", components_[i].c_str());
    }
}

int ComponentVocab::id_of(const std::string& symbol) const {
    auto it = index_.find(symbol);
    return it == index_.end() ? -1 : it->second;
}

const std::string& ComponentVocab::symbol(int id) const {
    static const std::string kEos = "EOS";
    if (id == eos_id()) return kEos;
    check(id >= 0 && id < eos_id(), "vocab: id out of range");
    return components_[static_cast<size_t>(id)];
}

ComponentVocab ComponentVocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("vocab: cannot open %s", path.c_str());
    std::vector<std::string> components;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        check(!line.empty(), "vocab: blank line in " + path);
        components.push_back(line);
    }
    return ComponentVocab(std::move(components));
}

void ComponentVocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail("vocab: cannot write %s", path.c_str());
    for (const std::string& c : components_) out << c << '\n';
}

bool is_ids_operator(const std::string& s) {
    // U+2FF0..U+2FFF encode as E2 BF B0 .. E2 BF BF
    return s.size() == 3 && static_cast<unsigned char>(s[0]) == 0xE2 &&
           static_cast<unsigned char>(s[1]) == 0xBF &&
           static_cast<unsigned char>(s[2]) >= 0xB0;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

}  // namespace

DecompositionTable DecompositionTable::load(const std::string& path,
                                            const ComponentVocab& vocab) {
    std::ifstream in(path);
    if (!in) fail("decomposition table: cannot open %s", path.c_str());
    DecompositionTable table;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos)
            fail("decomposition table %s:%d: missing tab separator", path.c_str(), lineno);
        const std::string character = line.substr(0, tab);
        if (character.empty())
            fail("decomposition table %s:%d: empty character", path.c_str(), lineno);
        if (table.contains(character))
            fail("decomposition table %s:%d: duplicate character '%s'", path.c_str(), lineno,
                 character.c_str());
        ComponentSequence seq;
        for (const std::string& tok : split_ws(line.substr(tab + 1))) {
            if (is_ids_operator(tok)) continue;  // layout operators carry no loss signal
            const int id = vocab.id_of(tok);
            if (id < 0)
                fail("decomposition table %s:%d: unknown component symbol '%s'", path.c_str(),
                     lineno, tok.c_str());
            seq.ids.push_back(id);
        }
        if (seq.ids.empty())
            fail("decomposition table %s:%d: no leaf components for '%s'", path.c_str(), lineno,
                 character.c_str());
        table.add(character, std::move(seq));
    }
    return table;
}

void DecompositionTable::add(const std::string& character, ComponentSequence seq) {
    check(!seq.ids.empty(), "decomposition: empty sequence for '" + character + "'");
    auto [it, inserted] = entries_.emplace(character, std::move(seq));
    check(inserted, "decomposition: duplicate character '" + character + "'");
    order_.push_back(character);
}

bool DecompositionTable::contains(const std::string& character) const {
    return entries_.count(character) != 0;
}

const ComponentSequence& DecompositionTable::decompose(const std::string& character) const {
    auto it = entries_.find(character);
    if (it == entries_.end())
        fail("decomposition: character '%s' not in table", character.c_str());
    return it->second;
}

void DecompositionTable::save(const std::string& path, const ComponentVocab& vocab) const {
    std::ofstream out(path);
    if (!out) fail("decomposition table: cannot write %s", path.c_str());
    for (const std::string& ch : order_) {
        out << ch << '\t';
        const ComponentSequence& seq = entries_.at(ch);
        for (size_t i = 0; i < seq.ids.size(); ++i) {
            out << vocab.symbol(seq.ids[i]);
            if (i + 1 < seq.ids.size()) out << ' ';
        }
        out << '\n';
    }
}

PaddedBatch pad_batch(const std::vector<ComponentSequence>& seqs, int t_max, int eos_id) {
    PaddedBatch out;
    out.batch = static_cast<int>(seqs.size());
    out.width = t_max + 1;
    out.ids.assign(static_cast<size_t>(out.batch) * out.width, eos_id);
    out.lengths.resize(seqs.size());
    for (size_t b = 0; b < seqs.size(); ++b) {
        const ComponentSequence& s = seqs[b];
        if (s.length() > t_max)
            fail("pad_batch: sequence length %d exceeds T_max %d", s.length(), t_max);
        check(s.length() >= 1, "pad_batch: empty sequence");
        for (int t = 0; t < s.length(); ++t) out.ids[b * out.width + t] = s.ids[t];
        out.lengths[b] = s.length();
    }
    return out;
}

}  // namespace glyphsynth
