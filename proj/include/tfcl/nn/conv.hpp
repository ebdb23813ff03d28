#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "tfcl/core/blas.hpp"
#include "tfcl/core/error.hpp"

namespace tfcl::nn {

/// Valid (unpadded), stride-1 2-D convolution over a (C, H, W) input.
/// A 1-D convolution is the H = 1, kernel_h = 1 case.
struct ConvGeom {
    std::size_t in_c = 0, in_h = 0, in_w = 0;
    std::size_t kernel_h = 0, kernel_w = 0;
    std::size_t out_c = 0;

    std::size_t out_h() const { return in_h - kernel_h + 1; }
    std::size_t out_w() const { return in_w - kernel_w + 1; }
    std::size_t positions() const { return out_h() * out_w(); }
    std::size_t patch() const { return in_c * kernel_h * kernel_w; }
    std::size_t in_size() const { return in_c * in_h * in_w; }
    std::size_t out_size() const { return out_c * positions(); }

    void validate() const {
        require(in_c > 0 && out_c > 0 && kernel_h > 0 && kernel_w > 0 && kernel_h <= in_h && kernel_w <= in_w,
                ErrorCode::BadShape, "convolution kernel larger than its input");
    }
};

namespace detail {

template <class T>
std::vector<T>& scratch(int slot) {
    thread_local std::vector<T> buffers[4];
    return buffers[slot];
}

}  // namespace detail

/// cols[(c, ky, kx)][(y, x)] = in[c][y + ky][x + kx]
template <class T>
void im2col(const ConvGeom& g, const T* in, T* cols) {
    const std::size_t oh = g.out_h(), ow = g.out_w(), P = g.positions();
    for (std::size_t c = 0; c < g.in_c; ++c)
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                T* row = cols + ((c * g.kernel_h + ky) * g.kernel_w + kx) * P;
                for (std::size_t y = 0; y < oh; ++y) {
                    const T* src = in + (c * g.in_h + y + ky) * g.in_w + kx;
                    std::copy(src, src + ow, row + y * ow);
                }
            }
}

/// out = W * im2col(in) + b, with W laid out (out_c, in_c, kh, kw).
template <class T>
void conv_forward(const ConvGeom& g, const T* weight, const T* bias, const T* in, T* out) {
    const std::size_t P = g.positions(), R = g.patch();
    auto& cols = detail::scratch<T>(0);
    cols.resize(R * P);
    im2col(g, in, cols.data());
    blas::gemm(false, false, static_cast<int>(g.out_c), static_cast<int>(P), static_cast<int>(R), T(1), weight,
               static_cast<int>(R), cols.data(), static_cast<int>(P), T(0), out, static_cast<int>(P));
    for (std::size_t o = 0; o < g.out_c; ++o) {
        T* row = out + o * P;
        for (std::size_t p = 0; p < P; ++p) row[p] += bias[o];
    }
}

/// Backward pass given the pre-activation gradient `d_out` (out_c, P).
/// Positions whose gradient column is entirely zero are skipped, which keeps
/// the layers below a global max-pool cheap. Accumulates into d_weight and
/// d_bias; overwrites d_in when it is non-null.
template <class T>
void conv_backward(const ConvGeom& g, const T* weight, const T* in, const T* d_out, T* d_weight, T* d_bias, T* d_in) {
    const std::size_t P = g.positions(), R = g.patch(), ow = g.out_w();
    std::vector<std::size_t> active;
    active.reserve(P);
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t o = 0; o < g.out_c; ++o)
            if (d_out[o * P + p] != T(0)) {
                active.push_back(p);
                break;
            }
    }
    if (d_in) std::fill(d_in, d_in + g.in_size(), T(0));
    const std::size_t J = active.size();
    if (J == 0) return;

    auto& d_compact = detail::scratch<T>(1);
    auto& cols = detail::scratch<T>(2);
    d_compact.resize(g.out_c * J);
    cols.resize(R * J);
    for (std::size_t o = 0; o < g.out_c; ++o) {
        T acc = T(0);
        for (std::size_t j = 0; j < J; ++j) {
            d_compact[o * J + j] = d_out[o * P + active[j]];
            acc += d_compact[o * J + j];
        }
        d_bias[o] += acc;
    }
    for (std::size_t c = 0; c < g.in_c; ++c)
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                T* row = cols.data() + ((c * g.kernel_h + ky) * g.kernel_w + kx) * J;
                for (std::size_t j = 0; j < J; ++j) {
                    const std::size_t y = active[j] / ow, x = active[j] % ow;
                    row[j] = in[(c * g.in_h + y + ky) * g.in_w + x + kx];
                }
            }
    // dW (out_c, R) += d_compact (out_c, J) * cols^T (J, R)
    blas::gemm(false, true, static_cast<int>(g.out_c), static_cast<int>(R), static_cast<int>(J), T(1),
               d_compact.data(), static_cast<int>(J), cols.data(), static_cast<int>(J), T(1), d_weight,
               static_cast<int>(R));
    if (!d_in) return;
    // dcols (R, J) = W^T (R, out_c) * d_compact (out_c, J), then scatter-add
    blas::gemm(true, false, static_cast<int>(R), static_cast<int>(J), static_cast<int>(g.out_c), T(1), weight,
               static_cast<int>(R), d_compact.data(), static_cast<int>(J), T(0), cols.data(), static_cast<int>(J));
    for (std::size_t c = 0; c < g.in_c; ++c)
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const T* row = cols.data() + ((c * g.kernel_h + ky) * g.kernel_w + kx) * J;
                for (std::size_t j = 0; j < J; ++j) {
                    const std::size_t y = active[j] / ow, x = active[j] % ow;
                    d_in[(c * g.in_h + y + ky) * g.in_w + x + kx] += row[j];
                }
            }
}

}  // namespace tfcl::nn
