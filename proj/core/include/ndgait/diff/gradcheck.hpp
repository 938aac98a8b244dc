// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ndgait/diff/tape.hpp"

namespace ndg::diff {

struct GradCheckOptions {
    double eps = 1e-5;
    // 0 checks every coordinate; otherwise a seeded sample of this many per parameter.
    std::size_t max_entries_per_param = 0;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    // coordinates whose ±eps probes changed a ReLU/pool/clamp decision
    std::size_t skipped_kinks = 0;
};

using LossFn = std::function<Var<double>(Tape<double> &)>;

/// Compares reverse-mode gradients of f with central differences over the
/// given parameters: max |analytic − numeric| / max(1, |numeric|).
inline GradCheckResult finite_diff_check(const LossFn &f, const std::vector<Parameter<double> *> &params,
                                         const GradCheckOptions &opt = {}) {
    auto eval = [&](std::uint64_t *sig) {
        Tape<double> tape(0, false);
        tape.set_track_kinks(true);
        const double v = f(tape).item();
        if (!std::isfinite(v)) throw NumericError("finite_diff_check: loss is not finite");
        if (sig) *sig = tape.kink_signature();
        return v;
    };

    for (auto *p : params) p->zero_grad();
    std::uint64_t base_sig = 0;
    {
        Tape<double> tape(0, true);
        tape.set_track_kinks(true);
        auto root = f(tape);
        if (!std::isfinite(root.item())) throw NumericError("finite_diff_check: loss is not finite");
        base_sig = tape.kink_signature();
        tape.backward(root);
    }

    GradCheckResult res;
    std::mt19937_64 rng(opt.seed);
    for (auto *p : params) {
        const std::size_t n = p->value.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (opt.max_entries_per_param && n > opt.max_entries_per_param) {
            for (std::size_t i = 0; i < opt.max_entries_per_param; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
                std::swap(idx[i], idx[j]);
            }
            idx.resize(opt.max_entries_per_param);
        }
        const Tensor<double> analytic = p->grad;
        for (std::size_t i : idx) {
            const double orig = p->value[i];
            std::uint64_t sp = 0, sm = 0;
            p->value[i] = orig + opt.eps;
            const double fp = eval(&sp);
            p->value[i] = orig - opt.eps;
            const double fm = eval(&sm);
            p->value[i] = orig;
            if (sp != base_sig || sm != base_sig) {
                ++res.skipped_kinks;
                continue;
            }
            const double numeric = (fp - fm) / (2.0 * opt.eps);
            const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
            ++res.checked;
            if (err >= res.max_rel_error) {
                res.max_rel_error = err;
                res.worst_param = p->name;
                res.worst_index = i;
            }
        }
    }
    return res;
}

} // namespace ndg::diff
