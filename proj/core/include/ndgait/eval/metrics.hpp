// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ndgait/diff/tensor.hpp"

namespace ndg::eval {

/// Sample Pearson correlation. Throws UndefinedMetricError when n < 2 or
/// either side has zero variance.
double pearson_r(const double *y, const double *yhat, std::size_t n);
/// 1 - SS_res / SS_tot. Throws UndefinedMetricError for constant y.
double r2_score(const double *y, const double *yhat, std::size_t n);
double rmse(const double *y, const double *yhat, std::size_t n);

inline double pearson_r(const std::vector<double> &y, const std::vector<double> &yh) {
    return pearson_r(y.data(), yh.data(), std::min(y.size(), yh.size()));
}
inline double r2_score(const std::vector<double> &y, const std::vector<double> &yh) {
    return r2_score(y.data(), yh.data(), std::min(y.size(), yh.size()));
}
inline double rmse(const std::vector<double> &y, const std::vector<double> &yh) {
    return rmse(y.data(), yh.data(), std::min(y.size(), yh.size()));
}

/// A metric that may be undefined; value is NaN when !defined.
struct Metric {
    double value;
    bool defined;
};

struct JointMetrics {
    std::string joint;
    Metric r, r2;
    double rmse;
};

/// Metrics of one trial (one held-out session), per joint and macro-averaged
/// over the joints whose metric is defined.
struct MetricsReport {
    std::string fold;
    std::string subject_id;
    std::string trial_id;
    std::size_t n = 0;
    std::vector<JointMetrics> joints;
    double mean_r = 0, mean_r2 = 0, mean_rmse = 0;
    std::size_t undefined = 0; // undefined (joint, metric) entries excluded from the means
};

/// y and yhat are [n×J].
MetricsReport compute_report(const diff::Tensor<double> &y, const diff::Tensor<double> &yhat,
                             const std::vector<std::string> &joint_names, std::string fold = "",
                             std::string subject_id = "", std::string trial_id = "");

/// Mean and sample std of the trial-level means.
struct Aggregate {
    double mean_r = 0, std_r = 0, mean_r2 = 0, std_r2 = 0, mean_rmse = 0, std_rmse = 0;
    std::size_t trials = 0;
};
Aggregate aggregate(const std::vector<MetricsReport> &reports);

/// CSV rows per (fold, subject, trial, joint), a "macro" row per trial, then
/// "mean" and "std" rows across trials.
void write_metrics_csv(const std::vector<MetricsReport> &reports, const std::string &path);

} // namespace ndg::eval
