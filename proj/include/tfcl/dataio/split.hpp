#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/core/error.hpp"
#include "tfcl/core/rng.hpp"
#include "tfcl/dataio/window.hpp"

namespace tfcl::dataio {

enum class Scheme { Scheme1, Scheme2 };

inline constexpr std::size_t kScheme1Folds = 5;

inline std::string to_string(Scheme s) { return s == Scheme::Scheme1 ? "scheme1" : "scheme2"; }

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "scheme1") return Scheme::Scheme1;
    if (s == "scheme2") return Scheme::Scheme2;
    fail(ErrorCode::ConfigInvalid, "unknown scheme '" + s + "' (expected scheme1 or scheme2)");
}

struct Fold {
    std::set<std::string> train;
    std::set<std::string> val;
    std::set<std::string> test;

    friend bool operator==(const Fold&, const Fold&) = default;
};

/// Subject-disjoint fold assignment. Windows follow their subject.
struct SplitPlan {
    Scheme scheme = Scheme::Scheme1;
    std::vector<Fold> folds;
    std::uint64_t seed = 0;

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

inline nlohmann::json to_json(const SplitPlan& plan) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : plan.folds)
        folds.push_back({{"train", f.train}, {"val", f.val}, {"test", f.test}});
    return {{"scheme", to_string(plan.scheme)}, {"seed", plan.seed}, {"folds", folds}};
}

namespace detail {

inline std::size_t held_out_count(double fraction, std::size_t n, bool at_least_one) {
    if (n < 2 || fraction <= 0.0) return 0;
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (at_least_one && k == 0) k = 1;
    return std::min(k, n - 1);
}

// Moves `count` subjects from `pool` (in the order given by `rng`) into `taken`.
inline void take_subjects(std::vector<std::string> pool, std::size_t count, RngStream rng,
                          std::set<std::string>& taken, std::set<std::string>& rest) {
    const auto order = rng.permutation(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) (i < count ? taken : rest).insert(pool[order[i]]);
}

}  // namespace detail

inline SplitPlan make_splits(const std::set<std::string>& subject_set, Scheme scheme, std::uint64_t seed,
                             double val_fraction = 0.2, double test_fraction = 0.2) {
    require(val_fraction >= 0.0 && val_fraction < 1.0 && test_fraction > 0.0 && test_fraction < 1.0,
            ErrorCode::InvalidParams, "split fractions must lie in [0,1) and (0,1)");
    const std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
    const std::size_t n = subjects.size();
    RngStream rng(seed, 0x5b1u);
    SplitPlan plan;
    plan.scheme = scheme;
    plan.seed = seed;

    if (scheme == Scheme::Scheme1) {
        require(n >= kScheme1Folds, ErrorCode::TooFewSubjects,
                "scheme1 needs at least 5 subjects, found " + std::to_string(n));
        const auto order = rng.permutation(n);
        std::vector<std::vector<std::string>> groups(kScheme1Folds);
        for (std::size_t i = 0; i < n; ++i) groups[i % kScheme1Folds].push_back(subjects[order[i]]);
        for (std::size_t k = 0; k < kScheme1Folds; ++k) {
            Fold fold;
            fold.test.insert(groups[k].begin(), groups[k].end());
            std::vector<std::string> train_side;
            for (const auto& s : subjects)
                if (!fold.test.count(s)) train_side.push_back(s);
            detail::take_subjects(train_side, detail::held_out_count(val_fraction, train_side.size(), true),
                                  rng.split(k + 1), fold.val, fold.train);
            plan.folds.push_back(std::move(fold));
        }
    } else {
        require(n >= 2, ErrorCode::TooFewSubjects, "scheme2 needs at least 2 subjects, found " + std::to_string(n));
        Fold fold;
        std::set<std::string> train_side_set;
        detail::take_subjects(subjects, detail::held_out_count(test_fraction, n, true), rng.split(1), fold.test,
                              train_side_set);
        std::vector<std::string> train_side(train_side_set.begin(), train_side_set.end());
        detail::take_subjects(train_side, detail::held_out_count(val_fraction, train_side.size(), true),
                              rng.split(2), fold.val, fold.train);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

inline SplitPlan make_splits(const std::vector<SignalWindow>& windows, Scheme scheme, std::uint64_t seed,
                             double val_fraction = 0.2, double test_fraction = 0.2) {
    std::set<std::string> subjects;
    for (const auto& w : windows) subjects.insert(w.subject);
    return make_splits(subjects, scheme, seed, val_fraction, test_fraction);
}

}  // namespace tfcl::dataio
