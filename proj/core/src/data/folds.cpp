// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/data/folds.hpp"

#include <algorithm>
#include <set>

#include "ndgait/error.hpp"
#include "ndgait/rng.hpp"

namespace ndg::data {

Protocol parse_protocol(const std::string &s) {
    if (s == "kfold") return Protocol::KFold;
    if (s == "loso") return Protocol::Loso;
    throw ConfigError("unknown protocol '" + s + "' (expected kfold or loso)");
}

std::string to_string(Protocol p) { return p == Protocol::KFold ? "kfold" : "loso"; }

std::vector<FoldPlan> make_folds(const std::vector<std::string> &subjects, Protocol protocol, std::uint64_t seed,
                                 const std::vector<std::string> &exclude) {
    std::vector<std::string> cohort;
    std::set<std::string> seen;
    const std::set<std::string> drop(exclude.begin(), exclude.end());
    for (const auto &s : subjects) {
        if (!seen.insert(s).second) throw ConfigError("make_folds: duplicate subject '" + s + "'");
        if (!drop.count(s)) cohort.push_back(s);
    }
    const std::size_t n = cohort.size();
    std::vector<FoldPlan> plans;

    if (protocol == Protocol::KFold) {
        constexpr std::size_t K = 10;
        if (n < K || n % K != 0)
            throw ConfigError("make_folds: kfold needs a multiple of 10 subjects, got " + std::to_string(n));
        Rng rng(seed);
        rng.shuffle(cohort.begin(), cohort.end());
        const std::size_t per = n / K;
        std::vector<std::vector<std::string>> folds(K);
        for (std::size_t i = 0; i < n; ++i) folds[i / per].push_back(cohort[i]);
        const std::size_t shift = 1 + seed % (K - 1);
        for (std::size_t k = 0; k < K; ++k) {
            FoldPlan p;
            p.protocol = protocol;
            const std::size_t v = (k + shift) % K;
            p.test_subjects = folds[k];
            p.val_subjects = folds[v];
            for (std::size_t f = 0; f < K; ++f)
                if (f != k && f != v) p.train_subjects.insert(p.train_subjects.end(), folds[f].begin(), folds[f].end());
            plans.push_back(std::move(p));
        }
        return plans;
    }

    if (n < 3) throw ConfigError("make_folds: loso needs at least 3 subjects, got " + std::to_string(n));
    const std::size_t shift = 1 + seed % (n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        FoldPlan p;
        p.protocol = protocol;
        const std::size_t v = (i + shift) % n;
        p.test_subjects = {cohort[i]};
        p.val_subjects = {cohort[v]};
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && j != v) p.train_subjects.push_back(cohort[j]);
        plans.push_back(std::move(p));
    }
    return plans;
}

} // namespace ndg::data
