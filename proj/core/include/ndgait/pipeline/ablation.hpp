// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ndgait/pipeline/train.hpp"

namespace ndg::pipeline {

/// The seven ablation configurations in table order, starting with the full
/// model.
std::vector<std::pair<std::string, Ablation>> ablation_matrix();

struct AblationRow {
    std::string name;
    Ablation flags;
    std::vector<double> seed_r;       // mean r per seed over every test session
    std::vector<double> seed_seconds; // wall time per seed, Stage I included
    eval::Aggregate agg;              // over all test sessions of all seeds
    std::vector<eval::MetricsReport> reports;
};

using AblationProgress = std::function<void(const std::string &row, std::uint64_t seed, const std::string &fold,
                                            double r)>;

/// Runs the selected rows (all when `rows` is empty) for every seed and fold
/// plan. Rows with identical Stage I settings share the Stage I model of a
/// (seed, fold) pair.
std::vector<AblationRow> run_ablation(const RunConfig &base, const Dataset &ds,
                                      const std::vector<data::FoldPlan> &plans,
                                      const std::vector<std::uint64_t> &seeds,
                                      const std::vector<std::string> &rows = {},
                                      const AblationProgress &progress = nullptr);

/// configuration,pearson_r_mean,pearson_r_std,r2_mean,r2_std,rmse_mean,rmse_std,seeds
void write_ablation_csv(const std::vector<AblationRow> &rows, const std::string &path);

} // namespace ndg::pipeline
