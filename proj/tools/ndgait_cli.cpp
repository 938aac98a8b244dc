// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"

#include "ndgait/analysis/analysis.hpp"
#include "ndgait/data/io.hpp"
#include "ndgait/data/synth.hpp"
#include "ndgait/error.hpp"
#include "ndgait/fusion/fusion.hpp"
#include "ndgait/pipeline/ablation.hpp"
#include "ndgait/pipeline/stream.hpp"
#include "ndgait/pipeline/train.hpp"

namespace fs = std::filesystem;
using namespace ndg;
using namespace ndg::pipeline;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr const char *kPreprocessedMarker = ".preprocessed";

struct Globals {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
};

RunConfig resolve_config(const Globals &g) {
    RunConfig c = g.config.empty() ? RunConfig{} : load_config(g.config);
    if (g.seed_set) c.seed = g.seed;
    if (!g.out_dir.empty()) c.out_dir = g.out_dir;
    c.validate();
    return c;
}

fs::path out_path(const RunConfig &c, const std::string &name) {
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / name;
}

Dataset load_data(const std::string &dir) {
    auto raw = data::load_dataset(dir);
    if (raw.empty()) throw InputError("no sessions under " + dir);
    if (fs::exists(fs::path(dir) / kPreprocessedMarker)) {
        Dataset ds;
        for (auto &s : raw) ds.sessions.push_back(std::make_shared<const data::RawSession>(std::move(s)));
        return ds;
    }
    return prepare_dataset(raw);
}

data::FoldPlan fold_plan(const RunConfig &c, const Dataset &ds, std::size_t fold) {
    const auto plans = data::make_folds(ds.subjects(), c.protocol, c.seed, c.exclude_subjects);
    if (fold >= plans.size())
        throw ConfigError("fold " + std::to_string(fold) + " out of range; plan has " + std::to_string(plans.size()));
    return plans[fold];
}

// Keeps the network geometry of a checkpoint and every other setting of the run.
Model load_for_run(const std::string &path, const RunConfig &c) {
    Model m = load_checkpoint(path);
    const auto net = m.cfg.net;
    m.cfg = c;
    m.cfg.net = net;
    return m;
}

data::SessionPtr find_session(const Dataset &ds, const std::string &subject, const std::string &session) {
    for (const auto &s : ds.sessions)
        if (s->subject_id == subject && (session.empty() || s->session_id == session)) return s;
    throw ConfigError("no session " + subject + (session.empty() ? "" : "_" + session) + " in dataset");
}

void print_report(const std::vector<eval::MetricsReport> &reports) {
    const auto g = eval::aggregate(reports);
    std::printf("trials=%zu r=%.4f±%.4f r2=%.4f±%.4f rmse=%.4f±%.4f\n", g.trials, g.mean_r, g.std_r, g.mean_r2,
                g.std_r2, g.mean_rmse, g.std_rmse);
}

std::vector<std::uint64_t> parse_seeds(const std::string &s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) out.push_back(std::stoull(tok));
    if (out.empty()) throw ConfigError("empty seed list");
    return out;
}

} // namespace

int main(int argc, char **argv) {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 64 << 20);
#endif
    CLI::App app{"ndgait: EEG-to-gait decoding"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { g.seed = v, g.seed_set = true; }, "Run seed");
    app.add_option("--out-dir", g.out_dir, "Output directory");

    // gen-data
    auto *gen = app.add_subcommand("gen-data", "Write a synthetic EEG and gait cohort");
    std::size_t n_subjects = 10;
    data::SynthConfig sc;
    gen->add_option("--subjects", n_subjects)->check(CLI::PositiveNumber);
    gen->add_option("--sessions", sc.sessions)->check(CLI::PositiveNumber);
    gen->add_option("--duration", sc.duration_s, "Seconds per session")->check(CLI::PositiveNumber);
    gen->add_option("--channels", sc.channels)->check(CLI::PositiveNumber);
    gen->add_option("--joints", sc.joints)->check(CLI::IsMember({6, 8}));

    // preprocess
    auto *pre = app.add_subcommand("preprocess", "Filter, re-reference and normalize a dataset");
    std::string data_dir;
    pre->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);

    std::size_t fold = 0;
    std::string ckpt;
    auto add_data_fold = [&](CLI::App *s) {
        s->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
        s->add_option("--fold", fold, "Fold index of the configured protocol");
    };

    auto *s1 = app.add_subcommand("train-stage1", "Phase-aware pretraining of the encoders");
    add_data_fold(s1);

    auto *s2 = app.add_subcommand("train-stage2", "Session heads and domain scorer on a frozen encoder");
    add_data_fold(s2);
    s2->add_option("--ckpt", ckpt, "Stage I checkpoint (random encoder when omitted)");

    auto *ft = app.add_subcommand("finetune", "Adapt a Stage II model to a target session");
    std::string subject, session;
    ft->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
    ft->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    ft->add_option("--subject", subject)->required();
    ft->add_option("--session", session);

    auto *ev = app.add_subcommand("eval", "Evaluate a Stage II model on the test subjects of a fold");
    add_data_fold(ev);
    ev->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);

    auto *st = app.add_subcommand("stream", "Replay a session through the streaming harness");
    bool offline = false;
    st->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
    st->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    st->add_option("--subject", subject)->required();
    st->add_option("--session", session);
    st->add_flag("--offline", offline, "Zero-phase preprocessing instead of the causal filter");

    auto *an = app.add_subcommand("analyze", "Saliency, attention entropy or embedding export");
    std::string what;
    std::size_t entropy_batch = 32;
    an->add_option("kind", what)->required()->check(CLI::IsMember({"saliency", "entropy", "embeddings"}));
    add_data_fold(an);
    an->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    an->add_option("--batch", entropy_batch, "Samples per entropy batch")->check(CLI::PositiveNumber);

    auto *ab = app.add_subcommand("ablate", "Run the ablation table over all folds");
    std::string seeds = "0,1,2";
    std::vector<std::string> rows;
    ab->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
    ab->add_option("--seeds", seeds, "Comma separated seeds");
    ab->add_option("--rows", rows, "Configuration names (default all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        const RunConfig cfg = resolve_config(g);
        if (*gen) {
            const auto cohort = data::generate_synthetic_cohort(n_subjects, cfg.seed, sc);
            const fs::path root = fs::path(cfg.out_dir) / "data";
            std::vector<data::RawSession> all;
            for (std::size_t i = 0; i < cohort.size(); ++i) {
                for (std::size_t k = 0; k < cohort[i].sessions.size(); ++k) {
                    all.push_back(cohort[i].sessions[k]);
                    const auto &s = cohort[i].sessions[k];
                    const auto dir = root / s.key();
                    fs::create_directories(dir);
                    data::save_event_truth(cohort[i].events[k], dir);
                }
            }
            data::save_dataset(all, root);
            std::printf("wrote %zu sessions to %s\n", all.size(), root.string().c_str());
        } else if (*pre) {
            const auto ds = prepare_dataset(data::load_dataset(data_dir));
            std::vector<data::RawSession> out;
            for (const auto &s : ds.sessions) out.push_back(*s);
            const fs::path root = fs::path(cfg.out_dir) / "preprocessed";
            data::save_dataset(out, root);
            std::ofstream(root / kPreprocessedMarker) << "1\n";
            std::printf("wrote %zu sessions to %s\n", out.size(), root.string().c_str());
        } else if (*s1) {
            const auto ds = load_data(data_dir);
            const auto plan = fold_plan(cfg, ds, fold);
            AuditLog log;
            Model m = init_model(cfg);
            const auto rep = train_stage1(m, ds.of(plan.train_subjects), ds.of(plan.val_subjects), &log);
            log.check_no_leak(plan);
            const auto tag = "fold" + std::to_string(fold);
            save_checkpoint(m, out_path(cfg, "stage1_" + tag + ".ckpt").string());
            write_epochs_csv(rep, out_path(cfg, "stage1_" + tag + "_epochs.csv").string());
            log.write_csv(out_path(cfg, "stage1_" + tag + "_audit.csv").string());
            std::printf("stage1 %s: %zu epochs, best %zu, %.1f s\n", tag.c_str(), rep.epochs.size(), rep.best_epoch,
                        rep.seconds);
        } else if (*s2) {
            const auto ds = load_data(data_dir);
            const auto plan = fold_plan(cfg, ds, fold);
            Model m = ckpt.empty() ? init_model(cfg) : load_for_run(ckpt, cfg);
            if (ckpt.empty() && !cfg.ablation.no_stage1)
                throw ConfigError("train-stage2 needs --ckpt unless ablation.no_stage1 is set");
            AuditLog log;
            const auto rep = train_stage2(m, ds.of(plan.train_subjects), ds.of(plan.val_subjects), &log);
            log.check_no_leak(plan);
            const auto tag = "fold" + std::to_string(fold);
            save_checkpoint(m, out_path(cfg, "stage2_" + tag + ".ckpt").string());
            write_epochs_csv(rep, out_path(cfg, "stage2_" + tag + "_epochs.csv").string());
            log.write_csv(out_path(cfg, "stage2_" + tag + "_audit.csv").string());
            std::printf("stage2 %s: %zu heads, %zu epochs, best %zu\n", tag.c_str(), m.heads.count(),
                        rep.epochs.size(), rep.best_epoch);
        } else if (*ev) {
            const auto ds = load_data(data_dir);
            const auto plan = fold_plan(cfg, ds, fold);
            Model m = load_for_run(ckpt, cfg);
            const auto tag = "fold" + std::to_string(fold);
            const auto test = ds.of(plan.test_subjects);
            const auto r = evaluate(m, test, tag);
            write_predictions_csv(r, test.front()->joint_names, tag,
                                  out_path(cfg, "predictions_" + tag + ".csv").string());
            eval::write_metrics_csv(r.reports, out_path(cfg, "metrics_" + tag + ".csv").string());
            print_report(r.reports);
        } else if (*ft) {
            const auto ds = load_data(data_dir);
            Model m = load_for_run(ckpt, cfg);
            const auto target = find_session(ds, subject, session);
            for (const auto &s : m.source_sessions)
                if (s.rfind(target->subject_id + "_", 0) == 0)
                    throw ConfigError("target subject " + target->subject_id + " was a Stage II source");
            AuditLog log;
            const auto r = finetune_target(m, target, "target", &log);
            const auto tag = target->key();
            save_checkpoint(m, out_path(cfg, "finetune_" + tag + ".ckpt").string());
            write_epochs_csv(r.report, out_path(cfg, "finetune_" + tag + "_epochs.csv").string());
            eval::write_metrics_csv(r.zero_shot.reports, out_path(cfg, "zeroshot_" + tag + "_metrics.csv").string());
            eval::write_metrics_csv(r.finetuned.reports, out_path(cfg, "finetune_" + tag + "_metrics.csv").string());
            log.write_csv(out_path(cfg, "finetune_" + tag + "_audit.csv").string());
            std::printf("zero-shot r=%.4f fine-tuned r=%.4f (evaluation from sample %zu)\n",
                        mean_r(r.zero_shot.reports), mean_r(r.finetuned.reports), r.boundary);
        } else if (*st) {
            // streaming consumes the raw recording and filters it causally
            const auto raw = data::load_dataset(data_dir);
            const data::RawSession *s = nullptr;
            for (const auto &x : raw)
                if (!s && x.subject_id == subject && (session.empty() || x.session_id == session)) s = &x;
            if (!s) throw ConfigError("no session " + subject + " in " + data_dir);
            Model m = load_for_run(ckpt, cfg);
            const auto r = stream_infer(m, *s, !offline);
            write_stream_csv(r, s->joint_names, out_path(cfg, "stream_" + s->key() + ".csv").string());
            std::printf("predictions=%zu mean=%.3f ms p95=%.3f ms max=%.3f ms budget=%.1f ms %s\n", r.t_end.size(),
                        r.latency.mean(), r.latency.p95(), r.latency.max(), r.latency.budget_ms,
                        r.latency.within_budget() ? "ok" : "EXCEEDED");
        } else if (*an) {
            const auto ds = load_data(data_dir);
            const auto plan = fold_plan(cfg, ds, fold);
            Model m = load_for_run(ckpt, cfg);
            const auto test = ds.of(plan.test_subjects);
            const auto tag = "fold" + std::to_string(fold);
            if (what == "saliency") {
                const auto ws = data::segment_windows(test.front(), 0, m.cfg.net.window, m.cfg.net.window);
                std::vector<double> acc(m.cfg.net.channels, 0.0);
                for (std::size_t i = 0; i < ws.size(); ++i) {
                    const auto x = data::stack_eeg<Real>(ws, {i});
                    Tensor<Real> xi({x.dim(1), x.dim(2)}, x.data);
                    const auto sm = analysis::saliency_map(m.s1.eeg, m.heads, m.scorer, xi, cfg.ablation.no_fusion);
                    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += sm.S_bar[c] / static_cast<double>(ws.size());
                }
                analysis::SaliencyMap mean;
                mean.S_bar = acc;
                analysis::write_saliency_csv(mean, test.front()->channel_names,
                                             out_path(cfg, "saliency_" + tag + ".csv").string());
                std::printf("saliency over %zu windows of %s\n", ws.size(), test.front()->key().c_str());
            } else if (what == "entropy") {
                std::vector<analysis::EntropyErrorRecord> recs;
                for (const auto &s : test) {
                    const auto ws = data::segment_windows(s, 0, m.cfg.net.window, m.cfg.eval_stride);
                    std::vector<std::size_t> idx(ws.size());
                    std::iota(idx.begin(), idx.end(), std::size_t{0});
                    const auto z = encode_windows(m.s1.eeg, ws);
                    const auto pred = fusion::inference_predict(z, m.heads, m.scorer, cfg.ablation.no_fusion);
                    auto part = analysis::entropy_error_records(pred, data::stack_final_frames<double>(ws, idx),
                                                                entropy_batch);
                    for (auto &p : part) p.batch_id = recs.size(), recs.push_back(p);
                }
                const auto res = analysis::entropy_error_analysis(recs);
                analysis::write_entropy_csv(res, out_path(cfg, "entropy_" + tag + ".csv").string());
                std::printf("entropy/error pcc=%.4f over %zu batches\n", res.pcc, recs.size());
            } else {
                const auto st2 = analysis::export_embeddings(m.s1.eeg, test,
                                                             out_path(cfg, "embeddings_" + tag + ".csv").string());
                std::printf("embeddings rows=%zu skipped=%zu\n", st2.rows, st2.skipped);
            }
        } else if (*ab) {
            const auto ds = load_data(data_dir);
            const auto plans = data::make_folds(ds.subjects(), cfg.protocol, cfg.seed, cfg.exclude_subjects);
            const auto res = run_ablation(cfg, ds, plans, parse_seeds(seeds), rows,
                                          [](const std::string &row, std::uint64_t seed, const std::string &f, double r) {
                                              std::fprintf(stderr, "%s seed %llu %s r=%.4f\n", row.c_str(),
                                                           static_cast<unsigned long long>(seed), f.c_str(), r);
                                          });
            write_ablation_csv(res, out_path(cfg, "ablation.csv").string());
            for (const auto &r : res) std::printf("%-36s r=%.4f±%.4f\n", r.name.c_str(), r.agg.mean_r, r.agg.std_r);
        }
    } catch (const ConfigError &e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const NumericError &e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
