#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/core/rng.hpp"
#include "tfcl/dataio/recording.hpp"
#include "tfcl/dataio/window.hpp"

namespace tfcl::dataio {

/// One synthetic activity: a sinusoid per channel around a baseline.
struct ClassSpec {
    std::string label;
    std::array<double, 3> frequency_hz{1.0, 1.0, 1.0};
    double amplitude = 1.0;
    double offset = 0.0;
};

inline constexpr double kSynthRateHz = 50.0;

/// Deterministic toy corpus: one recording per (subject, class), each exactly
/// `windows_per_subject_class` windows long. Every channel of subject s is
/// amplitude * sin(2 pi f t + phase[s][c]) + offset + N(0, noise_std^2).
inline RecordingSet synth_dataset(std::size_t num_subjects, const std::vector<ClassSpec>& classes,
                                  std::size_t windows_per_subject_class, double noise_std, std::uint64_t seed,
                                  std::size_t window_len = kWindowLen) {
    require(num_subjects > 0 && !classes.empty() && windows_per_subject_class > 0 && window_len > 0,
            ErrorCode::InvalidSpec, "synthetic corpus needs subjects, classes and windows");
    require(noise_std >= 0.0, ErrorCode::InvalidSpec, "noise_std must be non-negative");
    for (std::size_t a = 0; a < classes.size(); ++a) {
        for (std::size_t b = a + 1; b < classes.size(); ++b) {
            require(classes[a].frequency_hz != classes[b].frequency_hz, ErrorCode::InvalidSpec,
                    "classes '" + classes[a].label + "' and '" + classes[b].label + "' share frequencies");
            require(classes[a].label != classes[b].label, ErrorCode::InvalidSpec,
                    "duplicate class label '" + classes[a].label + "'");
        }
    }

    RecordingSet rs;
    rs.sample_rate_hz = kSynthRateHz;
    const std::size_t length = windows_per_subject_class * window_len;
    const RngStream root(seed, 0x5e7u);
    for (std::size_t s = 0; s < num_subjects; ++s) {
        char name[32];
        std::snprintf(name, sizeof name, "s%02zu", s);
        RngStream phase_rng = root.split(2 * s);
        std::array<double, 3> phase{};
        for (auto& p : phase) p = phase_rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t k = 0; k < classes.size(); ++k) {
            const auto& spec = classes[k];
            RngStream noise_rng = root.split(2 * s + 1).split(k);
            Recording rec{name, spec.label, std::vector<Sample3>(length)};
            for (std::size_t n = 0; n < length; ++n) {
                const double t = static_cast<double>(n) / kSynthRateHz;
                for (std::size_t c = 0; c < 3; ++c) {
                    double v = spec.amplitude * std::sin(2.0 * std::numbers::pi * spec.frequency_hz[c] * t + phase[c]) +
                               spec.offset;
                    if (noise_std > 0.0) v += noise_rng.normal(0.0, noise_std);
                    rec.samples[n][c] = v;
                }
            }
            rs.recordings.push_back(std::move(rec));
        }
    }
    return rs;
}

}  // namespace tfcl::dataio
