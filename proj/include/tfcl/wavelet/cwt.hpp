#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/core/tensor.hpp"

namespace tfcl::wavelet {

/// Carrier angular frequency of the real Morlet exp(-t^2/2) cos(5t).
inline constexpr double kCarrier = 5.0;

/// |psi| < 2e-8 beyond this argument; the kernel is truncated there.
inline constexpr double kSupportRadius = 6.0;

inline double morlet(double t) { return std::exp(-0.5 * t * t) * std::cos(kCarrier * t); }

/// Frequency (cycles per time unit) a scale responds to: (5 / 2pi) / a.
inline double pseudo_frequency(double scale) { return kCarrier / (2.0 * std::numbers::pi) / scale; }
inline double scale_for_frequency(double frequency) { return kCarrier / (2.0 * std::numbers::pi) / frequency; }

/// Strictly increasing scales (seconds) plus the sampling period.
struct ScaleGrid {
    std::vector<double> scales;
    double dt = 0.02;

    std::size_t size() const noexcept { return scales.size(); }

    void validate() const {
        require(!scales.empty(), ErrorCode::InvalidRange, "scale grid is empty");
        require(dt > 0.0, ErrorCode::InvalidRange, "sampling period must be positive");
        for (std::size_t i = 0; i < scales.size(); ++i) {
            require(scales[i] > 0.0 && std::isfinite(scales[i]), ErrorCode::InvalidRange, "scales must be positive");
            if (i > 0) require(scales[i] > scales[i - 1], ErrorCode::InvalidRange, "scales must be increasing");
        }
    }

    friend bool operator==(const ScaleGrid&, const ScaleGrid&) = default;
};

/// Geometric grid whose pseudo-frequencies run from f_max (first, smallest
/// scale) down to f_min (last, largest scale).
inline ScaleGrid scale_grid(std::size_t n_scales, double f_min, double f_max, double dt) {
    require(n_scales >= 1, ErrorCode::InvalidRange, "need at least one scale");
    require(dt > 0.0, ErrorCode::InvalidRange, "sampling period must be positive");
    const double nyquist = 1.0 / (2.0 * dt);
    require(f_min > 0.0 && f_max < nyquist, ErrorCode::InvalidRange,
            "frequency band must lie inside (0, Nyquist=" + std::to_string(nyquist) + ")");
    if (n_scales == 1) {
        require(f_min == f_max, ErrorCode::InvalidRange, "a single-scale grid needs f_min == f_max");
    } else {
        require(f_min < f_max, ErrorCode::InvalidRange, "f_min must be below f_max");
    }
    ScaleGrid grid;
    grid.dt = dt;
    grid.scales.resize(n_scales);
    const double a_min = scale_for_frequency(f_max);
    const double a_max = scale_for_frequency(f_min);
    if (n_scales == 1) {
        grid.scales[0] = a_min;
        return grid;
    }
    const double log_step = std::log(a_max / a_min) / static_cast<double>(n_scales - 1);
    for (std::size_t i = 0; i < n_scales; ++i) grid.scales[i] = a_min * std::exp(log_step * static_cast<double>(i));
    grid.scales.back() = a_max;
    return grid;
}

/// Precomputed truncated Morlet kernels for one (grid, signal length) pair.
/// Entry (s, b) of the transform is
///   dt / sqrt(a_s) * sum_n x[n] psi((n - b) dt / a_s)
/// over the samples where |(n - b) dt / a_s| <= 6; no padding at the edges.
class CwtPlan {
public:
    CwtPlan(ScaleGrid grid, std::size_t length) : grid_(std::move(grid)), length_(length) {
        grid_.validate();
        require(length_ >= 2, ErrorCode::EmptySignal, "signal must have at least 2 samples");
        const std::size_t taps = 2 * length_ - 1;
        kernels_.assign(grid_.size() * taps, 0.0);
        for (std::size_t s = 0; s < grid_.size(); ++s) {
            const double a = grid_.scales[s];
            const double norm = grid_.dt / std::sqrt(a);
            for (std::size_t k = 0; k < taps; ++k) {
                const double arg = (static_cast<double>(k) - static_cast<double>(length_ - 1)) * grid_.dt / a;
                if (std::abs(arg) <= kSupportRadius) kernels_[s * taps + k] = norm * morlet(arg);
            }
        }
    }

    const ScaleGrid& grid() const noexcept { return grid_; }
    std::size_t length() const noexcept { return length_; }

    /// Coefficients, shape (n_scales, L).
    Tensor<double> transform(std::span<const double> x) const {
        require(!x.empty(), ErrorCode::EmptySignal, "empty signal");
        require(x.size() == length_, ErrorCode::BadShape,
                "plan built for length " + std::to_string(length_) + ", got " + std::to_string(x.size()));
        const std::size_t taps = 2 * length_ - 1;
        Tensor<double> out({grid_.size(), length_});
        for (std::size_t s = 0; s < grid_.size(); ++s) {
            const double* kernel = kernels_.data() + s * taps;
            for (std::size_t b = 0; b < length_; ++b) {
                const double* row = kernel + (length_ - 1 - b);  // row[n] = psi term for (n - b)
                double acc = 0.0;
                for (std::size_t n = 0; n < length_; ++n) acc += x[n] * row[n];
                out(s, b) = acc;
            }
        }
        return out;
    }

private:
    ScaleGrid grid_;
    std::size_t length_;
    std::vector<double> kernels_;
};

inline Tensor<double> cwt(std::span<const double> channel, const ScaleGrid& grid) {
    require(!channel.empty(), ErrorCode::EmptySignal, "empty signal");
    require(channel.size() >= 2, ErrorCode::EmptySignal, "signal must have at least 2 samples");
    return CwtPlan(grid, channel.size()).transform(channel);
}

}  // namespace tfcl::wavelet
