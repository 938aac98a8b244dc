// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "ndgait/error.hpp"

namespace ndg::eval {

namespace {

double mean(const double *x, std::size_t n) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s / static_cast<double>(n);
}

template <class F> Metric guarded(F &&f) {
    try {
        return {f(), true};
    } catch (const UndefinedMetricError &) {
        return {std::numeric_limits<double>::quiet_NaN(), false};
    }
}

bool is_constant(const double *x, std::size_t n) {
    return std::all_of(x, x + n, [&](double v) { return v == x[0]; });
}

} // namespace

double pearson_r(const double *y, const double *yhat, std::size_t n) {
    if (n < 2) throw UndefinedMetricError("pearson_r: need at least 2 samples");
    if (is_constant(y, n) || is_constant(yhat, n)) throw UndefinedMetricError("pearson_r: zero variance");
    const double my = mean(y, n), mh = mean(yhat, n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = y[i] - my, b = yhat[i] - mh;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (!(sxx > 0) || !(syy > 0)) throw UndefinedMetricError("pearson_r: zero variance");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

double r2_score(const double *y, const double *yhat, std::size_t n) {
    if (n < 2) throw UndefinedMetricError("r2_score: need at least 2 samples");
    if (is_constant(y, n)) throw UndefinedMetricError("r2_score: constant target");
    const double my = mean(y, n);
    double res = 0, tot = 0;
    for (std::size_t i = 0; i < n; ++i) {
        res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        tot += (y[i] - my) * (y[i] - my);
    }
    if (!(tot > 0)) throw UndefinedMetricError("r2_score: constant target");
    return 1.0 - res / tot;
}

double rmse(const double *y, const double *yhat, std::size_t n) {
    if (n < 1) throw InputError("rmse: empty input");
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return std::sqrt(s / static_cast<double>(n));
}

MetricsReport compute_report(const diff::Tensor<double> &y, const diff::Tensor<double> &yhat,
                             const std::vector<std::string> &joint_names, std::string fold, std::string subject_id,
                             std::string trial_id) {
    if (y.rank() != 2 || y.shape != yhat.shape)
        throw ShapeError("compute_report: y " + diff::shape_str(y.shape) + " vs yhat " + diff::shape_str(yhat.shape));
    const std::size_t n = y.dim(0), J = y.dim(1);
    if (!joint_names.empty() && joint_names.size() != J) throw ShapeError("compute_report: joint name count");
    MetricsReport rep;
    rep.fold = std::move(fold);
    rep.subject_id = std::move(subject_id);
    rep.trial_id = std::move(trial_id);
    rep.n = n;
    std::vector<double> a(n), b(n);
    double sr = 0, sr2 = 0, se = 0;
    std::size_t nr = 0, nr2 = 0;
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = y[i * J + j];
            b[i] = yhat[i * J + j];
        }
        JointMetrics m;
        m.joint = joint_names.empty() ? "j" + std::to_string(j) : joint_names[j];
        m.r = guarded([&] { return pearson_r(a, b); });
        m.r2 = guarded([&] { return r2_score(a, b); });
        m.rmse = rmse(a, b);
        if (m.r.defined) {
            sr += m.r.value;
            ++nr;
        } else {
            ++rep.undefined;
        }
        if (m.r2.defined) {
            sr2 += m.r2.value;
            ++nr2;
        } else {
            ++rep.undefined;
        }
        se += m.rmse;
        rep.joints.push_back(m);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.mean_r = nr ? sr / static_cast<double>(nr) : nan;
    rep.mean_r2 = nr2 ? sr2 / static_cast<double>(nr2) : nan;
    rep.mean_rmse = J ? se / static_cast<double>(J) : nan;
    return rep;
}

Aggregate aggregate(const std::vector<MetricsReport> &reports) {
    Aggregate g;
    auto stats = [&](auto get, double &m, double &s) {
        std::vector<double> v;
        for (const auto &r : reports)
            if (std::isfinite(get(r))) v.push_back(get(r));
        m = s = std::numeric_limits<double>::quiet_NaN();
        if (v.empty()) return;
        m = 0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        if (v.size() < 2) {
            s = 0;
            return;
        }
        double ss = 0;
        for (double x : v) ss += (x - m) * (x - m);
        s = std::sqrt(ss / static_cast<double>(v.size() - 1));
    };
    stats([](const MetricsReport &r) { return r.mean_r; }, g.mean_r, g.std_r);
    stats([](const MetricsReport &r) { return r.mean_r2; }, g.mean_r2, g.std_r2);
    stats([](const MetricsReport &r) { return r.mean_rmse; }, g.mean_rmse, g.std_rmse);
    g.trials = reports.size();
    return g;
}

void write_metrics_csv(const std::vector<MetricsReport> &reports, const std::string &path) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << std::setprecision(10);
    os << "fold,subject,trial,joint,n,pearson_r,r2,rmse,undefined\n";
    auto num = [](double v) {
        std::ostringstream s;
        s << std::setprecision(10);
        if (std::isfinite(v)) s << v;
        else s << "nan";
        return s.str();
    };
    for (const auto &r : reports) {
        for (const auto &j : r.joints)
            os << r.fold << ',' << r.subject_id << ',' << r.trial_id << ',' << j.joint << ',' << r.n << ','
               << num(j.r.value) << ',' << num(j.r2.value) << ',' << num(j.rmse) << ','
               << (!j.r.defined) + (!j.r2.defined) << '\n';
        os << r.fold << ',' << r.subject_id << ',' << r.trial_id << ",macro," << r.n << ',' << num(r.mean_r) << ','
           << num(r.mean_r2) << ',' << num(r.mean_rmse) << ',' << r.undefined << '\n';
    }
    const Aggregate g = aggregate(reports);
    os << "all,,,mean," << g.trials << ',' << num(g.mean_r) << ',' << num(g.mean_r2) << ',' << num(g.mean_rmse)
       << ",\n";
    os << "all,,,std," << g.trials << ',' << num(g.std_r) << ',' << num(g.std_r2) << ',' << num(g.std_rmse) << ",\n";
    if (!os) throw InputError("failed writing " + path);
}

} // namespace ndg::eval
