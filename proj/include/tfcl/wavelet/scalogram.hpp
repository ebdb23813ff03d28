#pragma once

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/core/tensor.hpp"
#include "tfcl/dataio/window.hpp"
#include "tfcl/wavelet/cwt.hpp"

namespace tfcl::wavelet {

/// Three-channel time-frequency image with pixel values in [0,1].
///
/// Stored channel-major as (channel, height, width): row 0 is the smallest
/// scale (highest frequency), so low frequencies sit at the bottom, and
/// columns run forward in time. `at(y, x, c)` gives the (H, W, C) view.
struct Scalogram {
    Tensor<float> planes;

    std::size_t channels() const { return planes.dim(0); }
    std::size_t height() const { return planes.dim(1); }
    std::size_t width() const { return planes.dim(2); }

    float& at(std::size_t y, std::size_t x, std::size_t c) { return planes(c, y, x); }
    float at(std::size_t y, std::size_t x, std::size_t c) const { return planes(c, y, x); }

    friend bool operator==(const Scalogram&, const Scalogram&) = default;
};

inline Scalogram blank_scalogram(std::size_t height, std::size_t width, std::size_t channels = 3) {
    return Scalogram{Tensor<float>({channels, height, width})};
}

/// |cwt| of each channel, min-max normalised per channel (a constant plane
/// becomes all zeros).
inline Scalogram scalogram(const dataio::SignalWindow& w, const CwtPlan& plan) {
    require(w.values.rank() == 2 && w.values.dim(1) == dataio::kChannels, ErrorCode::BadShape,
            "window must be (L, 3), got " + shape_string(w.values.shape()));
    const std::size_t length = w.values.dim(0);
    require(length == plan.length(), ErrorCode::BadShape,
            "window length " + std::to_string(length) + " does not match the CWT plan");
    Scalogram out = blank_scalogram(plan.grid().size(), length, dataio::kChannels);
    std::vector<double> channel(length);
    for (std::size_t c = 0; c < dataio::kChannels; ++c) {
        double peak = 0.0;
        for (std::size_t t = 0; t < length; ++t) {
            channel[t] = w.values(t, c);
            peak = std::max(peak, std::abs(channel[t]));
        }
        if (peak == 0.0) continue;
        // min-max normalisation is invariant to a positive gain, so scale to
        // unit peak first; this keeps huge inputs from overflowing
        for (auto& v : channel) v /= peak;
        const Tensor<double> coeffs = plan.transform(channel);
        double lo = std::abs(coeffs[0]);
        double hi = lo;
        for (double v : coeffs.values()) {
            lo = std::min(lo, std::abs(v));
            hi = std::max(hi, std::abs(v));
        }
        const double range = hi - lo;
        if (!(range > 0.0)) continue;
        float* plane = out.planes.data() + c * plan.grid().size() * length;
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            const double v = (std::abs(coeffs[i]) - lo) / range;
            plane[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return out;
}

inline Scalogram scalogram(const dataio::SignalWindow& w, const ScaleGrid& grid) {
    return scalogram(w, CwtPlan(grid, w.values.dim(0)));
}

/// Order-stable batch conversion; `jobs > 1` fans out over threads.
inline std::vector<Scalogram> scalograms(const std::vector<dataio::SignalWindow>& windows, const CwtPlan& plan,
                                         unsigned jobs = 1) {
    std::vector<Scalogram> out(windows.size());
    if (jobs <= 1 || windows.size() < 2) {
        for (std::size_t i = 0; i < windows.size(); ++i) out[i] = scalogram(windows[i], plan);
        return out;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned j = 0; j < jobs; ++j) {
        workers.emplace_back([&, j] {
            try {
                for (std::size_t i = j; i < windows.size(); i += jobs) out[i] = scalogram(windows[i], plan);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace tfcl::wavelet
