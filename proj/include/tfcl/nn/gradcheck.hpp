#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/core/rng.hpp"

namespace tfcl::nn {

/// Loss over a flat parameter vector. When `grad` is non-null the function
/// must also write the analytic gradient (same length as the parameters).
using FlatLossFn = std::function<double(const std::vector<double>& params, std::vector<double>* grad)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, 1e-6): absolute near zero.
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Central differences on `coords` random coordinates (all when 0 or when
/// there are fewer parameters than that).
inline GradCheckReport grad_check(const FlatLossFn& loss, std::vector<double> params, double step = 1e-4,
                                  std::size_t coords = 0, std::uint64_t seed = 0) {
    std::vector<double> grad(params.size(), 0.0);
    const double base = loss(params, &grad);
    require(std::isfinite(base), ErrorCode::NonfiniteLoss, "loss is not finite at the starting point");
    std::vector<std::size_t> idx(params.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (coords > 0 && coords < params.size()) {
        RngStream rng(seed, 0x6c);
        const auto perm = rng.permutation(params.size());
        idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(coords));
    }
    GradCheckReport report;
    for (std::size_t i : idx) {
        const double keep = params[i];
        params[i] = keep + step;
        const double up = loss(params, nullptr);
        params[i] = keep - step;
        const double down = loss(params, nullptr);
        params[i] = keep;
        require(std::isfinite(up) && std::isfinite(down), ErrorCode::NonfiniteLoss,
                "loss is not finite under perturbation");
        const double numeric = (up - down) / (2.0 * step);
        const double rel = relative_error(grad[i], numeric);
        report.max_abs_error = std::max(report.max_abs_error, std::abs(grad[i] - numeric));
        if (rel > report.max_rel_error || report.checked == 0) {
            report.max_rel_error = std::max(report.max_rel_error, rel);
            report.worst_index = i;
        }
        ++report.checked;
    }
    return report;
}

}  // namespace tfcl::nn
