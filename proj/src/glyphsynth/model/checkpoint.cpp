#include "glyphsynth/model/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace glyphsynth {

using nlohmann::json;
using nn::Tensor;

namespace {
constexpr char kMagic[8] = {'G', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr int kFormatVersion = 1;
}  // namespace

void CheckpointWriter::add(const std::string& name, const Tensor& t) {
    check(t.defined(), "checkpoint: undefined tensor '" + name + "'");
    tensors_.emplace_back(name, t);
}

void CheckpointWriter::add_module(const std::string& prefix, nn::Module& m) {
    std::vector<std::pair<std::string, nn::Parameter*>> params;
    m.named_parameters(prefix + "/", params);
    for (auto& [name, p] : params) add(name, p->var.val());
    std::vector<std::pair<std::string, Tensor*>> buffers;
    m.named_buffers(prefix + "/", buffers);
    for (auto& [name, t] : buffers) add(name, *t);
}

void CheckpointWriter::add_adam(const std::string& prefix, nn::Adam& opt) {
    meta_["adam_t"][prefix] = opt.t();
    for (size_t i = 0; i < opt.params().size(); ++i) {
        const std::string base = prefix + "/" + std::to_string(i);
        add(base + ".m", opt.states()[i].m);
        add(base + ".v", opt.states()[i].v);
    }
}

void CheckpointWriter::write(const std::string& path) const {
    json header;
    header["format_version"] = kFormatVersion;
    header["meta"] = meta_;
    json manifest = json::array();
    for (const auto& [name, t] : tensors_) {
        json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        manifest.push_back(std::move(entry));
    }
    header["tensors"] = std::move(manifest);
    const std::string header_str = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) fail("checkpoint: cannot write %s", tmp.c_str());
        out.write(kMagic, sizeof(kMagic));
        const uint64_t len = header_str.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(header_str.data(), static_cast<std::streamsize>(len));
        for (const auto& [name, t] : tensors_)
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(t.numel() * sizeof(double)));
        check(static_cast<bool>(out), "checkpoint: short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

CheckpointReader::CheckpointReader(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("checkpoint: cannot open %s", path.c_str());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, 6) != 0)
        fail("checkpoint: %s is not a glyphsynth checkpoint", path.c_str());
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        fail("checkpoint: %s has container version %c%c, expected %c%c", path.c_str(), magic[6],
             magic[7], kMagic[6], kMagic[7]);
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    check(static_cast<bool>(in), "checkpoint: truncated header in " + path);
    json header = json::parse(header_str);
    const int version = header.at("format_version").get<int>();
    if (version != kFormatVersion)
        fail("checkpoint: %s has format_version %d, this build reads %d", path.c_str(), version,
             kFormatVersion);
    meta_ = header.at("meta");
    for (const json& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int64_t> shape = entry.at("shape").get<std::vector<int64_t>>();
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        check(static_cast<bool>(in), "checkpoint: truncated tensor '" + name + "' in " + path);
        tensors_.emplace(name, std::move(t));
    }
}

const Tensor& CheckpointReader::tensor(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) fail("checkpoint: missing tensor '%s'", name.c_str());
    return it->second;
}

void CheckpointReader::load_module(const std::string& prefix, nn::Module& m) const {
    std::vector<std::pair<std::string, nn::Parameter*>> params;
    m.named_parameters(prefix + "/", params);
    for (auto& [name, p] : params) {
        const Tensor& src = tensor(name);
        check(src.shape() == p->var.shape(),
              "checkpoint: shape mismatch for '" + name + "'");
        std::copy(src.begin(), src.end(), p->var.val().begin());
    }
    std::vector<std::pair<std::string, Tensor*>> buffers;
    m.named_buffers(prefix + "/", buffers);
    for (auto& [name, t] : buffers) {
        const Tensor& src = tensor(name);
        check(src.shape() == t->shape(), "checkpoint: shape mismatch for '" + name + "'");
        std::copy(src.begin(), src.end(), t->begin());
    }
}

void CheckpointReader::load_adam(const std::string& prefix, nn::Adam& opt) const {
    opt.set_t(meta_.at("adam_t").at(prefix).get<int64_t>());
    for (size_t i = 0; i < opt.params().size(); ++i) {
        const std::string base = prefix + "/" + std::to_string(i);
        const Tensor& m = tensor(base + ".m");
        const Tensor& v = tensor(base + ".v");
        check(m.shape() == opt.states()[i].m.shape() && v.shape() == opt.states()[i].v.shape(),
              "checkpoint: Adam state shape mismatch at " + base);
        opt.states()[i].m = m.clone();
        opt.states()[i].v = v.clone();
    }
}

bool CheckpointReader::has_namespace(const std::string& prefix) const {
    auto it = tensors_.lower_bound(prefix + "/");
    return it != tensors_.end() && it->first.rfind(prefix + "/", 0) == 0;
}

}  // namespace glyphsynth
