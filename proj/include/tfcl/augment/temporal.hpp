#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/special_functions/fpclassify.hpp>  // pchip.hpp calls unqualified isnan
#include <boost/math/interpolators/pchip.hpp>

#include "tfcl/core/error.hpp"
#include "tfcl/core/rng.hpp"
#include "tfcl/core/tensor.hpp"
#include "tfcl/dataio/window.hpp"

namespace tfcl::augment {

enum class TemporalKind { Noise, Scale, Negation, TimeFlip, ChannelShuffle, Permutation, Rotation, TimeWarp };

inline constexpr std::array kAllTemporalKinds = {
    TemporalKind::Noise,          TemporalKind::Scale,       TemporalKind::Negation, TemporalKind::TimeFlip,
    TemporalKind::ChannelShuffle, TemporalKind::Permutation, TemporalKind::Rotation, TemporalKind::TimeWarp};

inline std::string to_string(TemporalKind k) {
    switch (k) {
        case TemporalKind::Noise: return "noise";
        case TemporalKind::Scale: return "scale";
        case TemporalKind::Negation: return "negation";
        case TemporalKind::TimeFlip: return "time_flip";
        case TemporalKind::ChannelShuffle: return "channel_shuffle";
        case TemporalKind::Permutation: return "permutation";
        case TemporalKind::Rotation: return "rotation";
        case TemporalKind::TimeWarp: return "time_warp";
    }
    return "?";
}

inline TemporalKind temporal_kind_from_string(const std::string& s) {
    for (auto k : kAllTemporalKinds)
        if (to_string(k) == s) return k;
    fail(ErrorCode::ConfigInvalid, "unknown temporal transform '" + s + "'");
}

struct TemporalSpec {
    TemporalKind kind = TemporalKind::Noise;
    double noise_std = 0.1;
    double scale_mean = 1.0;
    double scale_std = 0.2;
    std::size_t permutation_segments = 4;
    std::size_t warp_knots = 4;
    double warp_std = 0.2;

    void validate() const {
        require(noise_std > 0.0 && scale_std > 0.0 && warp_std > 0.0, ErrorCode::InvalidParams,
                "temporal transform deviations must be positive");
        require(permutation_segments >= 1, ErrorCode::InvalidParams, "permutation needs at least one segment");
        require(warp_knots >= 2, ErrorCode::InvalidParams, "time warp needs at least two interior knots");
    }
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

inline void check_signal_shape(const Tensor<double>& v) {
    require(v.rank() == 2 && v.dim(1) == dataio::kChannels && v.dim(0) >= 2, ErrorCode::BadShape,
            "signal window must be (L>=2, 3), got " + shape_string(v.shape()));
}

inline Tensor<double> negate(Tensor<double> v) {
    for (auto& x : v.values()) x = -x;
    return v;
}

inline Tensor<double> time_flip(const Tensor<double>& v) {
    Tensor<double> out(v.shape());
    const std::size_t n = v.dim(0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t c = 0; c < v.dim(1); ++c) out(t, c) = v(n - 1 - t, c);
    return out;
}

/// out(:, c) = v(:, order[c])
inline Tensor<double> shuffle_channels(const Tensor<double>& v, const std::vector<std::size_t>& order) {
    Tensor<double> out(v.shape());
    for (std::size_t t = 0; t < v.dim(0); ++t)
        for (std::size_t c = 0; c < v.dim(1); ++c) out(t, c) = v(t, order.at(c));
    return out;
}

/// Splits the time axis into order.size() contiguous slices of length
/// L / segments (the last slice takes the remainder) and concatenates them
/// in the given 0-based order.
inline Tensor<double> permute_segments(const Tensor<double>& v, const std::vector<std::size_t>& order) {
    const std::size_t n = v.dim(0);
    const std::size_t segments = order.size();
    require(segments >= 1 && segments <= n, ErrorCode::InvalidParams, "segment count must lie in [1, L]");
    const std::size_t base = n / segments;
    auto begin = [&](std::size_t s) { return s * base; };
    auto end = [&](std::size_t s) { return s + 1 == segments ? n : (s + 1) * base; };
    Tensor<double> out(v.shape());
    std::size_t t_out = 0;
    for (std::size_t s : order)
        for (std::size_t t = begin(s); t < end(s); ++t, ++t_out)
            for (std::size_t c = 0; c < v.dim(1); ++c) out(t_out, c) = v(t, c);
    return out;
}

/// Rodrigues rotation about a unit axis.
inline Matrix3 rotation_matrix(std::array<double, 3> axis, double angle) {
    const double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    require(norm > 0.0, ErrorCode::ZeroVector, "rotation axis must be nonzero");
    for (auto& a : axis) a /= norm;
    const double c = std::cos(angle), s = std::sin(angle), C = 1.0 - c;
    const auto [x, y, z] = axis;
    return {{{c + x * x * C, x * y * C - z * s, x * z * C + y * s},
             {y * x * C + z * s, c + y * y * C, y * z * C - x * s},
             {z * x * C - y * s, z * y * C + x * s, c + z * z * C}}};
}

inline Tensor<double> rotate(const Tensor<double>& v, const Matrix3& r) {
    Tensor<double> out(v.shape());
    for (std::size_t t = 0; t < v.dim(0); ++t)
        for (std::size_t i = 0; i < 3; ++i) out(t, i) = r[i][0] * v(t, 0) + r[i][1] * v(t, 1) + r[i][2] * v(t, 2);
    return out;
}

/// Resamples `v` along a monotone time map through the knots
/// (i / (K+1), knot_times[i]); knot_times has K+2 entries starting at 0 and
/// ending at 1. The map is a monotone cubic (PCHIP) interpolant and the
/// signal is read back with endpoint-clamped linear interpolation.
inline Tensor<double> warp_time(const Tensor<double>& v, std::vector<double> knot_times) {
    const std::size_t n = v.dim(0);
    const std::size_t knots = knot_times.size();
    require(knots >= 4, ErrorCode::InvalidParams, "time warp needs at least four knots including endpoints");
    std::vector<double> knot_pos(knots);
    for (std::size_t i = 0; i < knots; ++i) knot_pos[i] = static_cast<double>(i) / static_cast<double>(knots - 1);
    boost::math::interpolators::pchip<std::vector<double>> warp(std::move(knot_pos), std::move(knot_times));
    Tensor<double> out(v.shape());
    const double last = static_cast<double>(n - 1);
    for (std::size_t t = 0; t < n; ++t) {
        const double src = std::clamp(warp(static_cast<double>(t) / last), 0.0, 1.0) * last;
        const auto lo = static_cast<std::size_t>(std::floor(src));
        const std::size_t hi = std::min(lo + 1, n - 1);
        const double frac = src - static_cast<double>(lo);
        for (std::size_t c = 0; c < v.dim(1); ++c) out(t, c) = v(lo, c) + frac * (v(hi, c) - v(lo, c));
    }
    return out;
}

inline Tensor<double> apply_temporal(const Tensor<double>& v, const TemporalSpec& spec, RngStream& rng) {
    check_signal_shape(v);
    spec.validate();
    switch (spec.kind) {
        case TemporalKind::Noise: {
            Tensor<double> out = v;
            for (auto& x : out.values()) x += rng.normal(0.0, spec.noise_std);
            return out;
        }
        case TemporalKind::Scale: {
            const double factor = rng.normal(spec.scale_mean, spec.scale_std);
            Tensor<double> out = v;
            for (auto& x : out.values()) x *= factor;
            return out;
        }
        case TemporalKind::Negation: return negate(v);
        case TemporalKind::TimeFlip: return time_flip(v);
        case TemporalKind::ChannelShuffle: return shuffle_channels(v, rng.permutation(v.dim(1)));
        case TemporalKind::Permutation: {
            const std::size_t segments = std::min(spec.permutation_segments, v.dim(0));
            return permute_segments(v, rng.permutation(segments));
        }
        case TemporalKind::Rotation: {
            std::array<double, 3> axis{};
            do {
                for (auto& a : axis) a = rng.normal();
            } while (axis[0] == 0.0 && axis[1] == 0.0 && axis[2] == 0.0);
            const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
            return rotate(v, rotation_matrix(axis, angle));
        }
        case TemporalKind::TimeWarp: {
            const std::size_t k = spec.warp_knots;
            std::vector<double> interior(k);
            for (std::size_t i = 0; i < k; ++i) {
                const double base = static_cast<double>(i + 1) / static_cast<double>(k + 1);
                interior[i] = std::clamp(base + rng.normal(0.0, spec.warp_std), 0.0, 1.0);
            }
            std::sort(interior.begin(), interior.end());
            std::vector<double> knot_times{0.0};
            knot_times.insert(knot_times.end(), interior.begin(), interior.end());
            knot_times.push_back(1.0);
            return warp_time(v, std::move(knot_times));
        }
    }
    fail(ErrorCode::InvalidParams, "unhandled temporal transform");
}

inline dataio::SignalWindow apply_temporal(const dataio::SignalWindow& w, const TemporalSpec& spec,
                                           RngStream& rng) {
    dataio::SignalWindow out = w;
    out.values = apply_temporal(w.values, spec, rng);
    return out;
}

}  // namespace tfcl::augment
