#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/core/error.hpp"
#include "tfcl/dataio/window.hpp"
#include "tfcl/nn/arch.hpp"
#include "tfcl/wavelet/cwt.hpp"
#include "tfcl/wavelet/scalogram.hpp"

namespace tfcl::contrastive {

/// Which learner: raw-signal (1-D) or scalogram (2-D).
enum class Stream { Signal, Scalogram };

inline std::string to_string(Stream s) { return s == Stream::Signal ? "signal" : "scalogram"; }

inline Stream stream_from_string(const std::string& s) {
    if (s == "signal") return Stream::Signal;
    if (s == "scalogram") return Stream::Scalogram;
    fail(ErrorCode::ConfigInvalid, "unknown stream '" + s + "'");
}

inline std::string encoder_arch(Stream s) { return s == Stream::Signal ? "signal_encoder" : "scalogram_encoder"; }

/// Morlet scale grid settings; the grid itself depends on the sample rate.
struct ScaleGridSpec {
    std::size_t scales = 128;
    double f_min = 0.5;
    double f_max = 20.0;

    wavelet::ScaleGrid grid(double sample_rate_hz) const {
        return wavelet::scale_grid(scales, f_min, f_max, 1.0 / sample_rate_hz);
    }

    friend bool operator==(const ScaleGridSpec&, const ScaleGridSpec&) = default;
};

inline nlohmann::json to_json(const wavelet::ScaleGrid& g) { return {{"dt", g.dt}, {"scales", g.scales}}; }

inline wavelet::ScaleGrid scale_grid_from_json(const nlohmann::json& j) {
    wavelet::ScaleGrid g;
    try {
        g.dt = j.at("dt").get<double>();
        g.scales = j.at("scales").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptManifest, std::string("bad scale grid: ") + e.what());
    }
    g.validate();
    return g;
}

/// Encoder input for a (time, channel) window: channel-major (C, 1, L).
template <class T>
std::vector<T> encoder_input(const Tensor<double>& values) {
    require(values.rank() == 2, ErrorCode::BadShape, "signal window must be (time, channel)");
    const std::size_t L = values.dim(0), C = values.dim(1);
    std::vector<T> out(C * L);
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t c = 0; c < C; ++c) out[c * L + t] = static_cast<T>(values(t, c));
    return out;
}

template <class T>
std::vector<T> encoder_input(const dataio::SignalWindow& w) {
    return encoder_input<T>(w.values);
}

/// Encoder input for a scalogram: its (C, H, W) planes as stored.
template <class T>
std::vector<T> encoder_input(const wavelet::Scalogram& s) {
    return std::vector<T>(s.planes.values().begin(), s.planes.values().end());
}

}  // namespace tfcl::contrastive
