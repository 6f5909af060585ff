#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "glyphsynth/common.hpp"

namespace glyphsynth {

// Ordered component ids; EOS appears only when sequences are materialized for
// the decoder (pad_batch), never inside `ids`.
struct ComponentSequence {
    std::vector<int> ids;

    int length() const { return static_cast<int>(ids.size()); }
    bool operator==(const ComponentSequence& o) const { return ids == o.ids; }
};

// Component symbols with dense ids 0..n-1; EOS is the reserved final id, so
// size() == components.size() + 1. GO is a decoder-internal token and owns no
// vocabulary id.
class ComponentVocab {
public:
    ComponentVocab() = default;
    explicit ComponentVocab(std::vector<std::string> components);

    int size() const { return static_cast<int>(components_.size()) + 1; }
    int eos_id() const { return static_cast<int>(components_.size()); }
    const std::vector<std::string>& components() const { return components_; }

    // -1 when unknown.
    int id_of(const std::string& symbol) const;
    const std::string& symbol(int id) const;  // eos_id() maps to "EOS"

    // File format: one component symbol per line, line index = id; EOS is
    // implicit. save(load(f)) is byte-identical to f.
    static ComponentVocab load(const std::string& path);
    void save(const std::string& path) const;

private:
    std::vector<std::string> components_;
    std::unordered_map<std::string, int> index_;
};

class DecompositionTable {
public:
    // TSV, one line per character: `<char>\t<comp1> <comp2> ...`. IDS layout
    // operators (U+2FF0..U+2FFF) in the component field are dropped; leaf
    // components are kept in file order. Unknown symbols and duplicate
    // characters are errors that name the offending line.
    static DecompositionTable load(const std::string& path, const ComponentVocab& vocab);

    void add(const std::string& character, ComponentSequence seq);
    bool contains(const std::string& character) const;
    const ComponentSequence& decompose(const std::string& character) const;

    const std::vector<std::string>& characters() const { return order_; }
    size_t size() const { return order_.size(); }

    void save(const std::string& path, const ComponentVocab& vocab) const;

private:
    std::unordered_map<std::string, ComponentSequence> entries_;
    std::vector<std::string> order_;
};

struct PaddedBatch {
    int batch = 0;
    int width = 0;               // T_max + 1
    std::vector<int> ids;        // row-major batch x width, EOS-filled
    std::vector<int> lengths;    // per row, excluding EOS
};

// Hard error on sequences longer than t_max (no silent truncation).
PaddedBatch pad_batch(const std::vector<ComponentSequence>& seqs, int t_max, int eos_id);

// True for the twelve-plus-reserved ideographic description codepoints.
bool is_ids_operator(const std::string& utf8_symbol);

}  // namespace glyphsynth
