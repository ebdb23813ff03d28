#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/nn/params.hpp"

namespace tfcl::nn {

/// Fully connected stack: dense -> ReLU -> ... -> dense. The output layer is
/// linear; softmax, when wanted, is applied by the caller.
template <class T>
class Mlp {
public:
    struct Cache {
        std::vector<std::vector<T>> inputs;  // inputs[l] feeds dense layer l (post-ReLU)
    };

    Mlp() = default;

    /// widths = {in, hidden..., out}
    explicit Mlp(std::vector<std::size_t> widths, std::uint64_t seed = 0) : widths_(std::move(widths)) {
        require(widths_.size() >= 2, ErrorCode::BadShape, "mlp needs an input and an output width");
        for (auto w : widths_) require(w > 0, ErrorCode::BadShape, "mlp widths must be positive");
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            const std::string prefix = "dense" + std::to_string(l + 1);
            params_.add(prefix + ".weight", {widths_[l + 1], widths_[l]}, false, widths_[l], widths_[l + 1]);
            params_.add(prefix + ".bias", {widths_[l + 1]});
        }
        glorot_init(params_, seed);
    }

    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    std::size_t input_dim() const { return widths_.front(); }
    std::size_t output_dim() const { return widths_.back(); }
    std::size_t layer_count() const { return widths_.size() - 1; }
    ParamSet<T>& params() noexcept { return params_; }
    const ParamSet<T>& params() const noexcept { return params_; }

    std::vector<T> forward(std::span<const T> x, Cache* cache = nullptr) const {
        require(x.size() == input_dim(), ErrorCode::BadShape,
                "dense input has " + std::to_string(x.size()) + " values, expected " + std::to_string(input_dim()));
        if (cache) cache->inputs.clear();
        std::vector<T> act(x.begin(), x.end());
        for (std::size_t l = 0; l < layer_count(); ++l) {
            if (cache) cache->inputs.push_back(act);
            const std::size_t in = widths_[l], out = widths_[l + 1];
            const T* w = params_[2 * l].value.data();
            const T* b = params_[2 * l + 1].value.data();
            std::vector<T> next(out);
            for (std::size_t o = 0; o < out; ++o) {
                T acc = b[o];
                const T* row = w + o * in;
                for (std::size_t i = 0; i < in; ++i) acc += row[i] * act[i];
                next[o] = (l + 1 < layer_count() && acc < T(0)) ? T(0) : acc;
            }
            act = std::move(next);
        }
        return act;
    }

    /// Accumulates parameter gradients into `grads` (skipped when null) and
    /// returns d(loss)/d(input).
    std::vector<T> backward(const Cache& cache, std::span<const T> d_out, ParamSet<T>* grads) const {
        require(d_out.size() == output_dim(), ErrorCode::BadShape, "dense output gradient has wrong size");
        std::vector<T> delta(d_out.begin(), d_out.end());
        for (std::size_t l = layer_count(); l-- > 0;) {
            const std::size_t in = widths_[l], out = widths_[l + 1];
            const auto& x = cache.inputs.at(l);
            const T* w = params_[2 * l].value.data();
            if (grads) {
                T* dw = (*grads)[2 * l].value.data();
                T* db = (*grads)[2 * l + 1].value.data();
                for (std::size_t o = 0; o < out; ++o) {
                    if (delta[o] == T(0)) continue;
                    db[o] += delta[o];
                    T* row = dw + o * in;
                    for (std::size_t i = 0; i < in; ++i) row[i] += delta[o] * x[i];
                }
            }
            std::vector<T> prev(in, T(0));
            for (std::size_t o = 0; o < out; ++o) {
                if (delta[o] == T(0)) continue;
                const T* row = w + o * in;
                for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
            }
            // x is the post-ReLU output of the previous layer (raw input for l == 0)
            if (l > 0)
                for (std::size_t i = 0; i < in; ++i)
                    if (x[i] <= T(0)) prev[i] = T(0);
            delta = std::move(prev);
        }
        return delta;
    }

private:
    std::vector<std::size_t> widths_;
    ParamSet<T> params_;
};

/// Numerically stable softmax (max-shifted).
template <class T>
std::vector<T> softmax(std::span<const T> logits) {
    require(!logits.empty(), ErrorCode::BadShape, "softmax of an empty vector");
    const T mx = *std::max_element(logits.begin(), logits.end());
    std::vector<T> out(logits.size());
    T sum = T(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

}  // namespace tfcl::nn
