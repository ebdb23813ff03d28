#pragma once

#include <Eigen/Core>

namespace tfcl::blas {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using ConstMap = Eigen::Map<const RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

template <class T>
using Map = Eigen::Map<RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

}  // namespace detail

/// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C, with leading
/// dimensions as in CBLAS. Eigen runs it single-threaded (no OpenMP), so
/// the summation order is fixed.
template <class T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb, T beta,
          T* c, int ldc) {
    using detail::ConstMap;
    const ConstMap<T> A(a, trans_a ? k : m, trans_a ? m : k, Eigen::OuterStride<>(lda));
    const ConstMap<T> B(b, trans_b ? n : k, trans_b ? k : n, Eigen::OuterStride<>(ldb));
    detail::Map<T> C(c, m, n, Eigen::OuterStride<>(ldc));
    if (beta == T(0)) C.setZero();
    else if (beta != T(1)) C *= beta;
    if (!trans_a && !trans_b) C.noalias() += alpha * A * B;
    else if (!trans_a && trans_b) C.noalias() += alpha * A * B.transpose();
    else if (trans_a && !trans_b) C.noalias() += alpha * A.transpose() * B;
    else C.noalias() += alpha * A.transpose() * B.transpose();
}

}  // namespace tfcl::blas
