#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tfcl/core/error.hpp"

namespace tfcl::dataio {

using Sample3 = std::array<double, 3>;

struct Recording {
    std::string subject;
    std::string label;
    std::vector<Sample3> samples;
};

/// Tri-axial recordings sharing one sampling rate.
struct RecordingSet {
    std::vector<Recording> recordings;
    double sample_rate_hz = 50.0;

    std::size_t total_samples() const {
        std::size_t n = 0;
        for (const auto& r : recordings) n += r.samples.size();
        return n;
    }

    void validate() const {
        require(sample_rate_hz > 0.0, ErrorCode::InvalidParams, "sample rate must be positive");
        for (const auto& r : recordings)
            require(!r.samples.empty(), ErrorCode::InvalidParams,
                    "recording of subject '" + r.subject + "' has no samples");
    }
};

/// Dense class indices in lexicographic order of the label strings.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(std::vector<std::string> names) : names_(std::move(names)) {
        std::sort(names_.begin(), names_.end());
        names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
    }

    static LabelMap from(const RecordingSet& rs) {
        std::vector<std::string> names;
        for (const auto& r : rs.recordings) names.push_back(r.label);
        return LabelMap(std::move(names));
    }

    std::optional<int> index_of(const std::string& label) const {
        auto it = std::lower_bound(names_.begin(), names_.end(), label);
        if (it == names_.end() || *it != label) return std::nullopt;
        return static_cast<int>(it - names_.begin());
    }

    const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    std::vector<std::string> names_;
};

}  // namespace tfcl::dataio
