#pragma once

#include <set>
#include <string>

#include "tfcl/core/error.hpp"

namespace tfcl {

/// Guards training loops against held-out subjects: every sample that
/// reaches a parameter update is checked against the forbidden set.
struct ProvenanceAudit {
    std::set<std::string> forbidden;
    std::size_t checks = 0;

    void check(const std::string& subject) {
        ++checks;
        require(!forbidden.contains(subject), ErrorCode::ProvenanceViolation,
                "held-out subject '" + subject + "' reached a training batch");
    }
};

}  // namespace tfcl
