#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <span>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/core/rng.hpp"
#include "tfcl/core/tensor.hpp"

namespace tfcl::nn {

/// A named trainable array. `regularized` marks convolution kernels, the
/// only weights that receive the L2 penalty.
template <class T>
struct Param {
    std::string name;
    Shape shape;
    std::vector<T> value;
    bool regularized = false;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;

    std::size_t size() const noexcept { return value.size(); }
    bool is_bias() const noexcept { return shape.size() == 1; }

    friend bool operator==(const Param&, const Param&) = default;
};

/// Ordered parameter list; the order is the serialization order.
template <class T>
class ParamSet {
public:
    std::size_t add(std::string name, Shape shape, bool regularized = false, std::size_t fan_in = 0,
                    std::size_t fan_out = 0) {
        const std::size_t n = shape_size(shape);
        params_.push_back({std::move(name), std::move(shape), std::vector<T>(n, T{}), regularized, fan_in, fan_out});
        return params_.size() - 1;
    }

    std::size_t count() const noexcept { return params_.size(); }
    Param<T>& operator[](std::size_t i) { return params_[i]; }
    const Param<T>& operator[](std::size_t i) const { return params_[i]; }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i].name == name) return i;
        fail(ErrorCode::ShapeMismatch, "no parameter named '" + name + "'");
    }

    std::size_t flat_size() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.size();
        return n;
    }

    std::vector<T> flatten() const {
        std::vector<T> out;
        out.reserve(flat_size());
        for (const auto& p : params_) out.insert(out.end(), p.value.begin(), p.value.end());
        return out;
    }

    void assign(std::span<const T> flat) {
        require(flat.size() == flat_size(), ErrorCode::SizeMismatch,
                "flat parameter vector has " + std::to_string(flat.size()) + " values, expected " +
                    std::to_string(flat_size()));
        std::size_t offset = 0;
        for (auto& p : params_) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                      flat.begin() + static_cast<std::ptrdiff_t>(offset + p.size()), p.value.begin());
            offset += p.size();
        }
    }

    ParamSet zeros_like() const {
        ParamSet out = *this;
        for (auto& p : out.params_) std::fill(p.value.begin(), p.value.end(), T{});
        return out;
    }

    void set_zero() {
        for (auto& p : params_) std::fill(p.value.begin(), p.value.end(), T{});
    }

    template <class U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        for (const auto& p : params_) {
            const std::size_t i = out.add(p.name, p.shape, p.regularized, p.fan_in, p.fan_out);
            std::copy(p.value.begin(), p.value.end(), out[i].value.begin());
        }
        return out;
    }

    /// Same names and shapes, in the same order.
    bool same_layout(const ParamSet& other) const {
        if (other.count() != count()) return false;
        for (std::size_t i = 0; i < count(); ++i)
            if (params_[i].name != other[i].name || params_[i].shape != other[i].shape) return false;
        return true;
    }

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

private:
    std::vector<Param<T>> params_;
};

/// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases.
template <class T>
void glorot_init(ParamSet<T>& params, std::uint64_t seed) {
    RngStream root(seed, 0x1417u);
    for (std::size_t i = 0; i < params.count(); ++i) {
        auto& p = params[i];
        if (p.is_bias()) {
            std::fill(p.value.begin(), p.value.end(), T{});
            continue;
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(p.fan_in + p.fan_out));
        RngStream rng = root.split(i);
        for (auto& w : p.value) w = static_cast<T>(rng.uniform(-limit, limit));
    }
}

template <class T>
double glorot_limit(const Param<T>& p) {
    return std::sqrt(6.0 / static_cast<double>(p.fan_in + p.fan_out));
}

}  // namespace tfcl::nn
