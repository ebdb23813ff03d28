#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/nn/params.hpp"

namespace tfcl::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    double l2 = 1e-4;  // applied as 2 * l2 * w to regularized (convolution) weights
};

template <class T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(const ParamSet<T>& params) {
        for (const auto& p : params) {
            m.emplace_back(p.size(), T(0));
            v.emplace_back(p.size(), T(0));
        }
    }
};

/// One Adam update with bias correction. Parameters whose `trainable` flag
/// is false (when a mask is given) are left untouched, moments included.
template <class T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state, const AdamConfig& config,
               const std::vector<bool>* trainable = nullptr) {
    require(params.same_layout(grads), ErrorCode::ShapeMismatch, "gradient layout differs from parameters");
    require(state.m.size() == params.count(), ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
    require(!trainable || trainable->size() == params.count(), ErrorCode::ShapeMismatch, "trainable mask size");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
    for (std::size_t i = 0; i < params.count(); ++i) {
        if (trainable && !(*trainable)[i]) continue;
        auto& p = params[i];
        const auto& g = grads[i];
        require(state.m[i].size() == p.size(), ErrorCode::ShapeMismatch, "optimizer moment size differs");
        const T decay = p.regularized ? static_cast<T>(2.0 * config.l2) : T(0);
        for (std::size_t k = 0; k < p.size(); ++k) {
            const T grad = g.value[k] + decay * p.value[k];
            T& m = state.m[i][k];
            T& v = state.v[i][k];
            m = b1 * m + (T(1) - b1) * grad;
            v = b2 * v + (T(1) - b2) * grad * grad;
            const double m_hat = static_cast<double>(m) / c1;
            const double v_hat = static_cast<double>(v) / c2;
            p.value[k] -= static_cast<T>(config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon));
        }
    }
}

}  // namespace tfcl::nn
