#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/core/tensor.hpp"
#include "tfcl/dataio/recording.hpp"

namespace tfcl::dataio {

inline constexpr std::size_t kWindowLen = 128;
inline constexpr std::size_t kChannels = 3;

/// One fixed-length slice of a recording; values are (time, channel).
struct SignalWindow {
    Tensor<double> values;
    std::string subject;
    std::optional<int> label;  // absent only for unlabeled pretraining data
    std::size_t source_offset = 0;
    std::size_t recording = 0;

    std::size_t length() const { return values.dim(0); }
};

struct WindowSet {
    std::vector<SignalWindow> windows;
    LabelMap labels;
    std::size_t window_len = kWindowLen;
    double sample_rate_hz = 50.0;
    std::size_t skipped_recordings = 0;  // shorter than one window

    std::set<std::string> subjects() const {
        std::set<std::string> out;
        for (const auto& w : windows) out.insert(w.subject);
        return out;
    }
};

inline std::size_t windows_per_recording(std::size_t length, std::size_t window_len, std::size_t stride) {
    return length < window_len ? 0 : (length - window_len) / stride + 1;
}

/// Segments every recording into windows that never cross a recording
/// boundary. With `labels` absent the map is built from `rs`; a supplied map
/// must cover every label in `rs`.
inline WindowSet window(const RecordingSet& rs, std::size_t window_len = kWindowLen, std::size_t stride = 64,
                        const LabelMap* labels = nullptr) {
    require(window_len > 0 && stride > 0, ErrorCode::InvalidParams, "window_len and stride must be positive");
    rs.validate();
    WindowSet out;
    out.labels = labels ? *labels : LabelMap::from(rs);
    out.window_len = window_len;
    out.sample_rate_hz = rs.sample_rate_hz;
    for (std::size_t r = 0; r < rs.recordings.size(); ++r) {
        const auto& rec = rs.recordings[r];
        const auto label = out.labels.index_of(rec.label);
        require(label.has_value(), ErrorCode::LabelsMissing, "label '" + rec.label + "' missing from label map");
        const std::size_t count = windows_per_recording(rec.samples.size(), window_len, stride);
        if (count == 0) {
            ++out.skipped_recordings;
            continue;
        }
        for (std::size_t k = 0; k < count; ++k) {
            SignalWindow w;
            w.values = Tensor<double>({window_len, kChannels});
            w.subject = rec.subject;
            w.label = label;
            w.source_offset = k * stride;
            w.recording = r;
            for (std::size_t t = 0; t < window_len; ++t)
                for (std::size_t c = 0; c < kChannels; ++c) w.values(t, c) = rec.samples[w.source_offset + t][c];
            out.windows.push_back(std::move(w));
        }
    }
    return out;
}

inline std::vector<SignalWindow> select_subjects(const std::vector<SignalWindow>& windows,
                                                 const std::set<std::string>& subjects) {
    std::vector<SignalWindow> out;
    for (const auto& w : windows)
        if (subjects.count(w.subject)) out.push_back(w);
    return out;
}

inline std::vector<SignalWindow> strip_labels(std::vector<SignalWindow> windows) {
    for (auto& w : windows) w.label.reset();
    return windows;
}

}  // namespace tfcl::dataio
