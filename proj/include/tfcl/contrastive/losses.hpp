#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tfcl/core/error.hpp"

namespace tfcl::contrastive {

template <class T>
T norm(std::span<const T> v) {
    T s = T(0);
    for (T x : v) s += x * x;
    return std::sqrt(s);
}

template <class T>
T dot(std::span<const T> u, std::span<const T> v) {
    T s = T(0);
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

template <class T>
T cosine_sim(std::span<const T> u, std::span<const T> v) {
    require(u.size() == v.size(), ErrorCode::LengthMismatch, "cosine similarity of vectors with different lengths");
    const T nu = norm(u), nv = norm(v);
    require(nu > T(0) && nv > T(0), ErrorCode::ZeroVector, "cosine similarity of a zero vector");
    return dot(u, v) / (nu * nv);
}

/// 2N latent rows; rows 2k and 2k+1 (0-based) are the two views of sample k.
template <class T>
struct LatentBatch {
    std::vector<std::vector<T>> z;
    T tau = T(0.5);

    std::size_t rows() const { return z.size(); }
    static std::size_t partner(std::size_t i) { return i ^ 1u; }

    void validate() const {
        require(z.size() >= 2 && z.size() % 2 == 0, ErrorCode::InvalidParams, "latent batch needs an even row count >= 2");
        require(tau > T(0), ErrorCode::InvalidParams, "temperature must be positive");
        for (const auto& row : z) {
            require(row.size() == z.front().size(), ErrorCode::BadShape, "latent rows differ in length");
            for (T v : row) require(std::isfinite(static_cast<double>(v)), ErrorCode::NonfiniteLoss, "latent row is not finite");
        }
    }
};

/// Per-anchor NT-Xent term -log(exp(s_ij) / sum_{k != i} exp(s_ik)), s = cos/tau,
/// computed with a max shift.
template <class T>
T ntxent_pair_loss(std::size_t i, std::size_t j, const LatentBatch<T>& b) {
    b.validate();
    require(i < b.rows() && j < b.rows() && i != j, ErrorCode::IndexOutOfRange, "bad positive pair");
    std::vector<T> s(b.rows());
    T mx = -INFINITY;
    for (std::size_t k = 0; k < b.rows(); ++k) {
        if (k == i) continue;
        s[k] = cosine_sim<T>(b.z[i], b.z[k]) / b.tau;
        mx = std::max(mx, s[k]);
    }
    T sum = T(0);
    for (std::size_t k = 0; k < b.rows(); ++k)
        if (k != i) sum += std::exp(s[k] - mx);
    return -(s[j] - mx) + std::log(sum);
}

/// Mean of the 2N anchor terms. When `grad` is non-null it receives
/// d(loss)/d(z) with the same layout as b.z.
template <class T>
T ntxent_batch_loss(const LatentBatch<T>& b, std::vector<std::vector<T>>* grad = nullptr) {
    b.validate();
    const std::size_t n = b.rows(), d = b.z.front().size();
    std::vector<std::vector<T>> u(n);
    std::vector<T> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        norms[i] = norm<T>(b.z[i]);
        require(norms[i] > T(0), ErrorCode::ZeroVector, "latent row " + std::to_string(i) + " is zero");
        u[i].resize(d);
        for (std::size_t c = 0; c < d; ++c) u[i][c] = b.z[i][c] / norms[i];
    }
    // softmax over k != i of s_ik, then G_ik = (P_ik - [k == partner]) / n
    std::vector<T> G(n * n, T(0));
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<T> s(n, T(0));
        T mx = -INFINITY;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            s[k] = dot<T>(u[i], u[k]) / b.tau;
            mx = std::max(mx, s[k]);
        }
        T sum = T(0);
        for (std::size_t k = 0; k < n; ++k)
            if (k != i) sum += std::exp(s[k] - mx);
        const std::size_t j = LatentBatch<T>::partner(i);
        total += -(s[j] - mx) + std::log(sum);
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            G[i * n + k] = (std::exp(s[k] - mx) / sum - (k == j ? T(1) : T(0))) / static_cast<T>(n);
        }
    }
    const T loss = total / static_cast<T>(n);
    require(std::isfinite(static_cast<double>(loss)), ErrorCode::NonfiniteLoss, "NT-Xent loss is not finite");
    if (grad) {
        grad->assign(n, std::vector<T>(d, T(0)));
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<T> du(d, T(0));
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i) continue;
                const T w = (G[i * n + k] + G[k * n + i]) / b.tau;
                for (std::size_t c = 0; c < d; ++c) du[c] += w * u[k][c];
            }
            // through the normalization u = z / |z|
            const T proj = dot<T>(du, u[i]);
            for (std::size_t c = 0; c < d; ++c) (*grad)[i][c] = (du[c] - proj * u[i][c]) / norms[i];
        }
    }
    return loss;
}

/// Gradients of the stop-gradient objective. The targets' entries are
/// structurally zero: nothing flows into a stop-gradient argument.
template <class T>
struct StopgradGrads {
    std::vector<T> d_p1, d_p2;
    std::vector<T> d_z1_target, d_z2_target;
};

namespace detail {

// d(-cos(p, t))/dp
template <class T>
std::vector<T> neg_cos_grad(std::span<const T> p, std::span<const T> t) {
    const T np = norm(p), nt = norm(t);
    const T c = dot(p, t) / (np * nt);
    std::vector<T> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = -(t[i] / (np * nt) - c * p[i] / (np * np));
    return g;
}

}  // namespace detail

/// 0.5 * (D(p1, sg(z2)) + D(p2, sg(z1))) with D = negative cosine similarity.
template <class T>
T stopgrad_loss(std::span<const T> z1, std::span<const T> z2, std::span<const T> p1, std::span<const T> p2,
                StopgradGrads<T>* grads = nullptr) {
    const T loss = T(0.5) * (-cosine_sim(p1, z2) - cosine_sim(p2, z1));
    require(std::isfinite(static_cast<double>(loss)), ErrorCode::NonfiniteLoss, "stop-gradient loss is not finite");
    if (grads) {
        grads->d_p1 = detail::neg_cos_grad(p1, z2);
        grads->d_p2 = detail::neg_cos_grad(p2, z1);
        for (auto& v : grads->d_p1) v *= T(0.5);
        for (auto& v : grads->d_p2) v *= T(0.5);
        grads->d_z1_target.assign(z1.size(), T(0));
        grads->d_z2_target.assign(z2.size(), T(0));
    }
    return loss;
}

}  // namespace tfcl::contrastive
