// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/pipeline/ablation.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>

#include "ndgait/error.hpp"

namespace ndg::pipeline {

std::vector<std::pair<std::string, Ablation>> ablation_matrix() {
    std::vector<std::pair<std::string, Ablation>> m;
    m.emplace_back("Full NeuroDyGait", Ablation{});
    Ablation a;
    a.no_pred = true;
    m.emplace_back("w/o Prediction Loss", a);
    a = {};
    a.no_rcl = true;
    m.emplace_back("w/o Rel. Contrastive Loss", a);
    a = {};
    a.no_rec = true;
    m.emplace_back("w/o Reconstruction Loss", a);
    a = {};
    a.no_stage1 = true;
    m.emplace_back("w/o Stage I", a);
    a = {};
    a.no_fusion = true;
    m.emplace_back("w/o Multi-head Fusion", a);
    a = {};
    a.cosine_distance = true;
    m.emplace_back("Cross-attention -> Cosine Similarity", a);
    return m;
}

namespace {

std::string stage1_key(const Ablation &a, std::uint64_t seed, std::size_t fold) {
    return std::to_string(a.no_rec) + std::to_string(a.no_pred) + std::to_string(a.no_rcl) +
           std::to_string(a.cosine_distance) + "/" + std::to_string(seed) + "/" + std::to_string(fold);
}

} // namespace

std::vector<AblationRow> run_ablation(const RunConfig &base, const Dataset &ds,
                                      const std::vector<data::FoldPlan> &plans,
                                      const std::vector<std::uint64_t> &seeds, const std::vector<std::string> &rows,
                                      const AblationProgress &progress) {
    std::vector<std::pair<std::string, Ablation>> sel;
    for (const auto &r : ablation_matrix())
        if (rows.empty() || std::find(rows.begin(), rows.end(), r.first) != rows.end()) sel.push_back(r);
    if (sel.size() != (rows.empty() ? ablation_matrix().size() : rows.size()))
        throw ConfigError("run_ablation: unknown configuration name in selection");

    std::map<std::string, Model> stage1_cache;
    std::vector<AblationRow> out;
    for (const auto &[name, flags] : sel) {
        AblationRow row;
        row.name = name;
        row.flags = flags;
        for (const auto seed : seeds) {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<eval::MetricsReport> seed_reports;
            for (std::size_t f = 0; f < plans.size(); ++f) {
                RunConfig cfg = base;
                cfg.seed = seed;
                cfg.ablation = flags;
                const std::string fold = "fold" + std::to_string(f);
                FoldResult fr;
                if (flags.no_stage1) {
                    fr = run_fold(cfg, ds, plans[f], fold);
                } else {
                    const auto key = stage1_key(flags, seed, f);
                    auto it = stage1_cache.find(key);
                    if (it == stage1_cache.end()) {
                        Model m = init_model(cfg);
                        train_stage1(m, ds.of(plans[f].train_subjects), ds.of(plans[f].val_subjects));
                        it = stage1_cache.emplace(key, std::move(m)).first;
                    }
                    fr = run_fold(cfg, ds, plans[f], fold, nullptr, &it->second);
                }
                if (progress) progress(name, seed, fold, mean_r(fr.eval.reports));
                seed_reports.insert(seed_reports.end(), fr.eval.reports.begin(), fr.eval.reports.end());
            }
            row.seed_r.push_back(mean_r(seed_reports));
            row.seed_seconds.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            row.reports.insert(row.reports.end(), seed_reports.begin(), seed_reports.end());
        }
        row.agg = eval::aggregate(row.reports);
        out.push_back(std::move(row));
    }
    return out;
}

void write_ablation_csv(const std::vector<AblationRow> &rows, const std::string &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path);
    os << "configuration,pearson_r_mean,pearson_r_std,r2_mean,r2_std,rmse_mean,rmse_std,seeds\n"
       << std::setprecision(6);
    for (const auto &r : rows)
        os << '"' << r.name << "\"," << r.agg.mean_r << ',' << r.agg.std_r << ',' << r.agg.mean_r2 << ','
           << r.agg.std_r2 << ',' << r.agg.mean_rmse << ',' << r.agg.std_rmse << ',' << r.seed_r.size() << '\n';
}

} // namespace ndg::pipeline
