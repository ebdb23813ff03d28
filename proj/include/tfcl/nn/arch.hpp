#pragma once

#include <array>
#include <string>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/nn/encoder.hpp"
#include "tfcl/nn/mlp.hpp"

namespace tfcl::nn {

inline constexpr std::size_t kEmbeddingDim = 96;
inline constexpr std::size_t kHarHidden = 256;
inline constexpr std::size_t kFusionHidden = 64;

inline constexpr std::array<const char*, 6> kArchIds = {"signal_encoder",  "scalogram_encoder", "projection_head",
                                                        "predictor_head", "har_head",          "fusion_head"};

inline bool is_encoder_arch(const std::string& arch) {
    return arch == "signal_encoder" || arch == "scalogram_encoder";
}

inline bool is_known_arch(const std::string& arch) {
    for (const char* a : kArchIds)
        if (arch == a) return true;
    return false;
}

inline EncoderConfig encoder_config(const std::string& arch) {
    if (arch == "signal_encoder") return signal_encoder_config();
    if (arch == "scalogram_encoder") return scalogram_encoder_config();
    fail(ErrorCode::UnknownArch, "'" + arch + "' is not an encoder architecture");
}

/// Layer widths of the dense architectures. `num_classes` only matters for
/// the classification heads.
inline std::vector<std::size_t> mlp_widths(const std::string& arch, std::size_t num_classes = 0) {
    if (arch == "projection_head" || arch == "predictor_head") return {kEmbeddingDim, kEmbeddingDim, kEmbeddingDim};
    if (arch == "har_head" || arch == "fusion_head") {
        require(num_classes >= 2, ErrorCode::InvalidParams, arch + " needs at least 2 classes");
        if (arch == "har_head") return {kEmbeddingDim, kHarHidden, num_classes};
        return {2 * kEmbeddingDim, kFusionHidden, num_classes};
    }
    fail(ErrorCode::UnknownArch, "unknown architecture '" + arch + "'");
}

/// Freshly initialized parameters of a named architecture.
template <class T>
ParamSet<T> init_params(const std::string& arch, std::uint64_t seed, std::size_t num_classes = 0) {
    if (is_encoder_arch(arch)) return ConvEncoder<T>(encoder_config(arch), seed).params();
    return Mlp<T>(mlp_widths(arch, num_classes), seed).params();
}

}  // namespace tfcl::nn
