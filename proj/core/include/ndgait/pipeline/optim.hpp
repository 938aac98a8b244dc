// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "ndgait/diff/tape.hpp"

namespace ndg::pipeline {

/// Linear warm-up from 0 to lr_max over warmup_steps, then cosine decay to
/// lr_min at total_steps. The end points are returned exactly.
double cosine_warmup_lr(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double lr_max,
                        double lr_min);

/// Adam with the usual defaults over a fixed parameter list.
template <class T> class Adam {
public:
    explicit Adam(std::vector<diff::Parameter<T> *> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void zero_grad();
    /// One update with the current gradients. Frozen parameters are skipped.
    void step(double lr);
    std::size_t steps() const { return t_; }

private:
    std::vector<diff::Parameter<T> *> params_;
    std::vector<std::vector<double>> m_, v_;
    double b1_, b2_, eps_;
    std::size_t t_ = 0;
};

} // namespace ndg::pipeline
