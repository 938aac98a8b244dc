// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "ndgait/diff/tensor.hpp"
#include "ndgait/rng.hpp"

namespace ndg::testing {

inline diff::Tensor<double> randn(diff::Shape s, Rng &rng, double sigma = 1.0) {
    diff::Tensor<double> t(std::move(s));
    for (auto &v : t.data) v = rng.normal(0.0, sigma);
    return t;
}

inline diff::Tensor<double> rand_uniform(diff::Shape s, Rng &rng, double lo, double hi) {
    diff::Tensor<double> t(std::move(s));
    for (auto &v : t.data) v = rng.uniform(lo, hi);
    return t;
}

inline double dot(const diff::Tensor<double> &a, const diff::Tensor<double> &b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace ndg::testing
