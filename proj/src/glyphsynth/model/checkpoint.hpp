#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "glyphsynth/nn/layers.hpp"

namespace glyphsynth {

// Versioned container: magic + JSON header (metadata and tensor manifest)
// followed by raw float64 payloads. Writes are atomic (temp file + rename).
class CheckpointWriter {
public:
    nlohmann::json& meta() { return meta_; }
    void add(const std::string& name, const nn::Tensor& t);
    void add_module(const std::string& prefix, nn::Module& m);
    void add_adam(const std::string& prefix, nn::Adam& opt);
    void write(const std::string& path) const;

private:
    nlohmann::json meta_ = nlohmann::json::object();
    std::vector<std::pair<std::string, nn::Tensor>> tensors_;
};

class CheckpointReader {
public:
    explicit CheckpointReader(const std::string& path);

    const nlohmann::json& meta() const { return meta_; }
    bool has(const std::string& name) const { return tensors_.count(name) != 0; }
    const nn::Tensor& tensor(const std::string& name) const;

    // Strict: every parameter and buffer must be present with matching shape.
    void load_module(const std::string& prefix, nn::Module& m) const;
    void load_adam(const std::string& prefix, nn::Adam& opt) const;

    // True when any stored tensor lives under `prefix`.
    bool has_namespace(const std::string& prefix) const;

private:
    nlohmann::json meta_;
    std::map<std::string, nn::Tensor> tensors_;
};

}  // namespace glyphsynth
