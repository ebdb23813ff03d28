#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/core/error.hpp"
#include "tfcl/nn/arch.hpp"

namespace tfcl::nn {

inline constexpr int kCheckpointSchemaVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kWeightsFile = "weights.bin";

/// One network inside a checkpoint, e.g. the signal encoder or a HAR head.
struct CheckpointComponent {
    std::string role;         // unique key, e.g. "signal.encoder"
    std::string arch;         // one of kArchIds
    nlohmann::json config;    // encoder layers or dense widths
    ParamSet<float> params;
};

struct Checkpoint {
    std::vector<CheckpointComponent> components;
    std::vector<std::string> label_map;
    std::uint64_t seed = 0;
    nlohmann::json hyperparameters = nlohmann::json::object();
    nlohmann::json history = nlohmann::json::array();
    std::vector<double> loss_curve;
    nlohmann::json extra = nlohmann::json::object();  // e.g. the scale grid

    const CheckpointComponent* find(const std::string& role) const {
        for (const auto& c : components)
            if (c.role == role) return &c;
        return nullptr;
    }

    const CheckpointComponent& at(const std::string& role) const {
        const auto* c = find(role);
        require(c != nullptr, ErrorCode::CorruptManifest, "checkpoint has no component '" + role + "'");
        return *c;
    }
};

inline nlohmann::json component_config(const ConvEncoder<float>& e) { return to_json(e.config()); }
inline nlohmann::json component_config(const Mlp<float>& m) { return {{"widths", m.widths()}}; }

/// Parameter layout implied by an architecture id and its config.
inline ParamSet<float> layout_for(const std::string& arch, const nlohmann::json& config) {
    require(is_known_arch(arch), ErrorCode::UnknownArch, "unknown architecture '" + arch + "'");
    try {
        if (is_encoder_arch(arch)) return ConvEncoder<float>(encoder_config_from_json(arch, config)).params();
        return Mlp<float>(config.at("widths").get<std::vector<std::size_t>>()).params();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptManifest, "bad config for " + arch + ": " + e.what());
    }
}

inline std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace detail {

inline std::vector<unsigned char> encode_floats(const Checkpoint& c) {
    std::vector<unsigned char> out;
    for (const auto& comp : c.components)
        for (const auto& p : comp.params)
            for (float f : p.value) {
                const auto bits = std::bit_cast<std::uint32_t>(f);
                for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
            }
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline nlohmann::json manifest_json(const Checkpoint& c, const std::vector<unsigned char>& blob) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& comp : c.components) {
        nlohmann::json params = nlohmann::json::array();
        for (const auto& p : comp.params) params.push_back({{"name", p.name}, {"shape", p.shape}});
        comps.push_back({{"role", comp.role}, {"arch", comp.arch}, {"config", comp.config}, {"params", params}});
    }
    return {{"schema_version", kCheckpointSchemaVersion},
            {"components", comps},
            {"label_map", c.label_map},
            {"seed", c.seed},
            {"hyperparameters", c.hyperparameters},
            {"history", c.history},
            {"loss_curve", c.loss_curve},
            {"extra", c.extra},
            {"weights",
             {{"file", kWeightsFile},
              {"dtype", "float32-le"},
              {"count", blob.size() / 4},
              {"fnv1a64", hex64(fnv1a64(blob.data(), blob.size()))}}}};
}

/// Writes `dir/manifest.json` and `dir/weights.bin`, creating `dir`.
inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    const auto blob = detail::encode_floats(c);
    {
        std::ofstream out(dir / kWeightsFile, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + (dir / kWeightsFile).string());
        out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
        require(static_cast<bool>(out), ErrorCode::IoError, "short write to " + (dir / kWeightsFile).string());
    }
    std::ofstream out(dir / kManifestFile, std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + (dir / kManifestFile).string());
    out << manifest_json(c, blob).dump(2) << '\n';
}

/// Loads and validates a checkpoint. Every consistency check (manifest
/// structure, declared shapes vs architecture, blob length, checksum) runs
/// before any weight is decoded.
inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(detail::read_file(dir / kManifestFile));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptManifest, "manifest is not valid JSON: " + std::string(e.what()));
    }
    Checkpoint c;
    std::vector<std::size_t> declared;
    std::string checksum;
    try {
        require(m.at("schema_version").get<int>() == kCheckpointSchemaVersion, ErrorCode::CorruptManifest,
                "unsupported checkpoint schema version");
        for (const auto& jc : m.at("components")) {
            CheckpointComponent comp;
            comp.role = jc.at("role").get<std::string>();
            comp.arch = jc.at("arch").get<std::string>();
            comp.config = jc.at("config");
            require(c.find(comp.role) == nullptr, ErrorCode::CorruptManifest, "duplicate component " + comp.role);
            comp.params = layout_for(comp.arch, comp.config);
            const auto& jp = jc.at("params");
            require(jp.size() == comp.params.count(), ErrorCode::SizeMismatch,
                    comp.role + ": manifest lists " + std::to_string(jp.size()) + " arrays, architecture has " +
                        std::to_string(comp.params.count()));
            for (std::size_t i = 0; i < jp.size(); ++i) {
                const auto shape = jp[i].at("shape").get<Shape>();
                require(jp[i].at("name").get<std::string>() == comp.params[i].name, ErrorCode::CorruptManifest,
                        comp.role + ": unexpected parameter name");
                require(shape == comp.params[i].shape, ErrorCode::SizeMismatch,
                        comp.role + "." + comp.params[i].name + ": manifest shape " + shape_string(shape) +
                            " differs from architecture " + shape_string(comp.params[i].shape));
                declared.push_back(shape_size(shape));
            }
            c.components.push_back(std::move(comp));
        }
        c.label_map = m.at("label_map").get<std::vector<std::string>>();
        c.seed = m.at("seed").get<std::uint64_t>();
        c.hyperparameters = m.at("hyperparameters");
        c.history = m.at("history");
        c.loss_curve = m.at("loss_curve").get<std::vector<double>>();
        c.extra = m.value("extra", nlohmann::json::object());
        checksum = m.at("weights").at("fnv1a64").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptManifest, "manifest is missing fields: " + std::string(e.what()));
    }
    std::size_t total = 0;
    for (auto n : declared) total += n;
    const std::string blob = detail::read_file(dir / kWeightsFile);
    require(blob.size() == total * 4, ErrorCode::SizeMismatch,
            "weights.bin holds " + std::to_string(blob.size()) + " bytes, manifest declares " +
                std::to_string(total * 4));
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    require(hex64(fnv1a64(bytes, blob.size())) == checksum, ErrorCode::ChecksumMismatch,
            "weights.bin checksum does not match the manifest");
    std::size_t offset = 0;
    for (auto& comp : c.components)
        for (auto& p : comp.params)
            for (auto& f : p.value) {
                std::uint32_t bits = 0;
                for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[offset + b]) << (8 * b);
                f = std::bit_cast<float>(bits);
                offset += 4;
            }
    return c;
}

}  // namespace tfcl::nn
