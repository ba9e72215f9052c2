#pragma once

#include "ctl/net/model.hpp"
#include "ctl/tensor_io.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace ctl::net {

/// Checkpoint container: "CTLC", u32 version, u32 metadata length, metadata
/// JSON, then the tensor table (see tensor_io.hpp).
struct Checkpoint {
    static constexpr char kMagic[] = "CTLC";
    static constexpr std::uint32_t kVersion = 1;

    nlohmann::json metadata = nlohmann::json::object();
    ModelParams<float> params;
};

inline TensorMap params_to_tensors(const ModelParams<float>& p) {
    TensorMap tensors;
    p.category.for_each_tensor([&](const char* name, const auto& t) { tensors[name] = to_tensor(t); });
    p.style.for_each_tensor([&](const char* name, const auto& t) { tensors[name] = to_tensor(t); });
    auto& style = const_cast<StyleHead<float>&>(p.style);
    style.for_each_state([&](const char* name, const auto& t) { tensors[name] = to_tensor(t); });
    return tensors;
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    return {{"input_dim", c.input_dim},           {"n_categories", c.n_categories},
            {"category_hidden", c.category_hidden}, {"style_hidden", c.style_hidden},
            {"embedding_dim", c.embedding_dim},   {"bn_momentum", c.bn_momentum},
            {"bn_eps", c.bn_eps}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.n_categories = j.at("n_categories").get<std::size_t>();
    c.category_hidden = j.at("category_hidden").get<std::size_t>();
    c.style_hidden = j.at("style_hidden").get<std::size_t>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.bn_momentum = j.value("bn_momentum", 0.9);
    c.bn_eps = j.value("bn_eps", 1e-5);
    return c;
}

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
    auto meta = ck.metadata;
    meta["model"] = model_config_to_json(ck.params.config);
    const auto text = meta.dump();
    binio::put_bytes(os, {Checkpoint::kMagic, 4});
    binio::put<std::uint32_t>(os, Checkpoint::kVersion);
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
    binio::put_bytes(os, text);
    write_tensors(os, params_to_tensors(ck.params));
}

inline Checkpoint read_checkpoint(std::istream& is) {
    binio::expect_magic(is, {Checkpoint::kMagic, 4});
    const auto version = binio::get<std::uint32_t>(is, "version");
    require(version == Checkpoint::kVersion, ErrorCode::VersionMismatch,
            "checkpoint version " + std::to_string(version));
    const auto len = binio::get<std::uint32_t>(is, "metadata length");
    Checkpoint ck;
    try {
        ck.metadata = nlohmann::json::parse(binio::get_bytes(is, len, "metadata"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("checkpoint metadata: ") + e.what());
    }
    ck.params.config = model_config_from_json(ck.metadata.at("model"));
    auto tensors = read_tensors(is);
    auto load = [&](const char* name, auto& t) {
        const auto it = tensors.find(name);
        require(it != tensors.end(), ErrorCode::ParseError, std::string("checkpoint missing tensor ") + name);
        from_tensor(it->second, t, name);
    };
    ck.params.category.for_each_tensor(load);
    ck.params.style.for_each_tensor(load);
    ck.params.style.for_each_state(load);
    const auto& c = ck.params.config;
    require(ck.params.style.fc1.w.cols() == static_cast<Eigen::Index>(c.input_dim) &&
                ck.params.style.fc2.w.rows() == static_cast<Eigen::Index>(c.embedding_dim) &&
                ck.params.category.fc2.w.rows() == static_cast<Eigen::Index>(c.n_categories),
            ErrorCode::DimensionMismatch, "checkpoint tensors disagree with model config");
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(bool(os), ErrorCode::Io, "cannot open " + path);
    write_checkpoint(os, ck);
    require(bool(os), ErrorCode::Io, "write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorCode::Io, "cannot open " + path);
    return read_checkpoint(is);
}

inline std::string checkpoint_digest(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorCode::Io, "cannot open " + path);
    return to_hex(file_digest(is));
}

}  // namespace ctl::net
