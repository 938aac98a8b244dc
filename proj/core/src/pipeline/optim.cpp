// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/pipeline/optim.hpp"

#include <cmath>
#include <numbers>

#include "ndgait/error.hpp"

namespace ndg::pipeline {

double cosine_warmup_lr(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double lr_max,
                        double lr_min) {
    if (warmup_steps >= total_steps)
        throw ConfigError("cosine_warmup_lr: warmup_steps must be below total_steps");
    if (step > total_steps) throw ConfigError("cosine_warmup_lr: step beyond total_steps");
    if (step < warmup_steps) return lr_max * static_cast<double>(step) / static_cast<double>(warmup_steps);
    if (step == warmup_steps) return lr_max;
    if (step == total_steps) return lr_min;
    const double p =
        static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * p));
}

template <class T>
Adam<T>::Adam(std::vector<diff::Parameter<T> *> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto *p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

template <class T> void Adam<T>::zero_grad() {
    for (auto *p : params_)
        if (p->trainable) p->zero_grad();
}

template <class T> void Adam<T>::step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto *p = params_[k];
        if (!p->trainable || p->grad.size() != p->value.size()) continue;
        auto &m = m_[k];
        auto &v = v_[k];
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = static_cast<double>(p->grad[i]);
            m[i] = b1_ * m[i] + (1 - b1_) * g;
            v[i] = b2_ * v[i] + (1 - b2_) * g * g;
            p->value[i] -= static_cast<T>(lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
        }
    }
}

template class Adam<float>;
template class Adam<double>;

} // namespace ndg::pipeline
