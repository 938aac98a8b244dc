// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace ndg::diff::detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C[m×n] (+)= op(A)·op(B) with row-major storage; op(A) is m×k.
// A is stored k×m when ta, B is stored n×k when tb.
template <class T>
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const T *A,
          const T *B, T *C, bool accumulate) {
    using CM = Eigen::Map<const RowMat<T>>;
    const Eigen::Index M = static_cast<Eigen::Index>(m);
    const Eigen::Index N = static_cast<Eigen::Index>(n);
    const Eigen::Index K = static_cast<Eigen::Index>(k);
    Eigen::Map<RowMat<T>> c(C, M, N);
    if (!accumulate) c.setZero();
    if (m == 0 || n == 0 || k == 0) return;
    if (!ta && !tb) {
        c.noalias() += CM(A, M, K) * CM(B, K, N);
    } else if (!ta && tb) {
        c.noalias() += CM(A, M, K) * CM(B, N, K).transpose();
    } else if (ta && !tb) {
        c.noalias() += CM(A, K, M).transpose() * CM(B, K, N);
    } else {
        c.noalias() += CM(A, K, M).transpose() * CM(B, N, K).transpose();
    }
}

} // namespace ndg::diff::detail
