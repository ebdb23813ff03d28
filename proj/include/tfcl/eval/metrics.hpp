#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/core/error.hpp"

namespace tfcl::eval {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::uint64_t> counts;  // row-major classes x classes

    explicit ConfusionMatrix(std::size_t c = 0) : classes(c), counts(c * c, 0) {}

    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * classes + pred]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }

    std::uint64_t total() const {
        std::uint64_t n = 0;
        for (auto v : counts) n += v;
        return n;
    }
    std::uint64_t row_sum(std::size_t c) const {
        std::uint64_t n = 0;
        for (std::size_t p = 0; p < classes; ++p) n += at(c, p);
        return n;
    }
    std::uint64_t col_sum(std::size_t c) const {
        std::uint64_t n = 0;
        for (std::size_t t = 0; t < classes; ++t) n += at(t, c);
        return n;
    }
    std::uint64_t trace() const {
        std::uint64_t n = 0;
        for (std::size_t c = 0; c < classes; ++c) n += at(c, c);
        return n;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t classes) {
    require(preds.size() == labels.size(), ErrorCode::LengthMismatch,
            std::to_string(preds.size()) + " predictions for " + std::to_string(labels.size()) + " labels");
    ConfusionMatrix m(classes);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (int v : {preds[i], labels[i]})
            require(v >= 0 && static_cast<std::size_t>(v) < classes, ErrorCode::IndexOutOfRange,
                    "class index " + std::to_string(v) + " outside [0, " + std::to_string(classes) + ")");
        ++m.at(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(preds[i]));
    }
    return m;
}

inline double accuracy(const ConfusionMatrix& m) {
    const auto n = m.total();
    require(n > 0, ErrorCode::EmptyMatrix, "accuracy of an empty confusion matrix");
    return static_cast<double>(m.trace()) / static_cast<double>(n);
}

/// Support-weighted mean of per-class F1; a class with P + R = 0 scores 0.
/// F1 is evaluated as 2TP / (2TP + FP + FN), the same quantity as 2PR/(P+R)
/// but with one rounding, so integer-ratio cases come out exact.
inline double weighted_f1(const ConfusionMatrix& m) {
    const auto n = m.total();
    require(n > 0, ErrorCode::EmptyMatrix, "weighted F1 of an empty confusion matrix");
    double out = 0.0;
    for (std::size_t c = 0; c < m.classes; ++c) {
        const auto support = m.row_sum(c);
        if (support == 0) continue;
        const auto tp = m.at(c, c);
        const auto denom = support + m.col_sum(c);  // 2TP + FN + FP
        if (tp == 0) continue;
        out += static_cast<double>(support) * static_cast<double>(2 * tp) / static_cast<double>(denom);
    }
    return out / static_cast<double>(n);
}

/// (N * trace - sum row*col) / (N^2 - sum row*col): the usual
/// (Acc_T - Acc_R) / (1 - Acc_R) with both terms scaled by N^2 and kept in
/// integers until the final division.
inline double cohen_kappa(const ConfusionMatrix& m) {
    const auto n = m.total();
    require(n > 0, ErrorCode::EmptyMatrix, "kappa of an empty confusion matrix");
    using wide = __int128;
    wide chance = 0;
    for (std::size_t c = 0; c < m.classes; ++c) chance += static_cast<wide>(m.row_sum(c)) * m.col_sum(c);
    const wide nn = static_cast<wide>(n) * n;
    require(chance < nn, ErrorCode::Degenerate, "kappa undefined: chance agreement is 1 (single class)");
    return static_cast<double>(static_cast<wide>(n) * m.trace() - chance) / static_cast<double>(nn - chance);
}

inline nlohmann::json to_json(const ConfusionMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = 0; t < m.classes; ++t) {
        nlohmann::json r = nlohmann::json::array();
        for (std::size_t p = 0; p < m.classes; ++p) r.push_back(m.at(t, p));
        rows.push_back(r);
    }
    return rows;
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& rows) {
    ConfusionMatrix m(rows.size());
    for (std::size_t t = 0; t < m.classes; ++t) {
        require(rows[t].size() == m.classes, ErrorCode::BadShape, "confusion matrix must be square");
        for (std::size_t p = 0; p < m.classes; ++p) m.at(t, p) = rows[t][p].get<std::uint64_t>();
    }
    return m;
}

}  // namespace tfcl::eval
