// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ndgait/data/folds.hpp"
#include "ndgait/data/preprocess.hpp"
#include "ndgait/data/session.hpp"
#include "ndgait/eval/metrics.hpp"
#include "ndgait/pipeline/model.hpp"

namespace ndg::pipeline {

/// Worker thread cap: NDG_THREADS if set and positive, else the hardware
/// concurrency (at least 1).
std::size_t worker_threads();

/// Preprocessed sessions shared read-only by every stage.
struct Dataset {
    std::vector<data::SessionPtr> sessions;

    /// Sorted unique subject ids.
    std::vector<std::string> subjects() const;
    /// Sessions of the listed subjects, in dataset order.
    std::vector<data::SessionPtr> of(const std::vector<std::string> &subjects) const;
};

Dataset prepare_dataset(const std::vector<data::RawSession> &raw, const data::PreprocessConfig &pre = {});

struct AuditEntry {
    std::string stage;
    std::string subject_id;
    std::string session_id;
};

/// Which sessions each training stage read windows from.
class AuditLog {
public:
    void record(const std::string &stage, const data::RawSession &s);
    const std::vector<AuditEntry> &entries() const { return entries_; }
    /// Throws ContractError if a training stage read a test subject.
    void check_no_leak(const data::FoldPlan &plan) const;
    void write_csv(const std::string &path) const;

private:
    std::vector<AuditEntry> entries_;
};

struct EpochStats {
    std::size_t epoch = 0;
    double lr = 0;   // at the last step of the epoch
    double total = 0; // mean training loss
    std::vector<std::pair<std::string, double>> components;
    double val = 0; // NaN without validation data
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    std::size_t steps = 0;
    double seconds = 0;
};

void write_epochs_csv(const TrainReport &r, const std::string &path);

/// Optimizes the Stage I objective on windows of `train`, early-stopping on
/// the validation loss over `val` (if any) and restoring the best weights.
/// Throws NumericError when the loss stops being finite.
TrainReport train_stage1(Model &m, const std::vector<data::SessionPtr> &train,
                         const std::vector<data::SessionPtr> &val, AuditLog *log = nullptr);

/// One head per training session plus the scorer. The encoder stays frozen
/// unless cfg.freeze_encoder_stage2 is false. Validation is the unmasked
/// mixture loss on `val`. Throws ConfigError when the model already has heads
/// for a different number of sessions.
TrainReport train_stage2(Model &m, const std::vector<data::SessionPtr> &train,
                         const std::vector<data::SessionPtr> &val, AuditLog *log = nullptr);

/// [N×d] embeddings of the given windows.
Tensor<Real> encode_windows(nets::EEGEncoder<Real> &enc, const std::vector<data::WindowSample> &ws,
                            std::size_t batch_size = 64);

struct SessionPredictions {
    std::string subject_id, session_id;
    std::vector<std::size_t> t_end;
    Tensor<double> y, yhat; // [N×J]
    std::vector<double> entropy;
};

struct EvalResult {
    std::vector<eval::MetricsReport> reports; // one per session
    std::vector<SessionPredictions> predictions;
};

/// Mixture predictions (uniform under no_fusion) for every window of each
/// session whose start is at or after t_start_min.
EvalResult evaluate(Model &m, const std::vector<data::SessionPtr> &test, const std::string &fold,
                    std::size_t t_start_min = 0);

void write_predictions_csv(const EvalResult &r, const std::vector<std::string> &joint_names, const std::string &fold,
                           const std::string &path);

struct FinetuneResult {
    EvalResult zero_shot, finetuned;
    TrainReport report;
    std::size_t tune_windows = 0, val_windows = 0;
    std::size_t boundary = 0; // first sample of the evaluation span
};

/// Tunes heads and scorer (and the encoder if cfg.finetune_encoder) on the
/// first cfg.finetune_s seconds of the target session, early-stops on the
/// next cfg.finetune_val_s seconds, and evaluates only windows that start
/// after both spans. Throws ConfigError when the session is too short.
FinetuneResult finetune_target(Model &m, const data::SessionPtr &target, const std::string &fold,
                               AuditLog *log = nullptr);

struct FoldResult {
    std::string fold;
    Model model;
    TrainReport stage1, stage2;
    EvalResult eval;
};

/// Stage I (unless no_stage1), Stage II and evaluation for one fold plan.
/// A non-null stage1_init skips Stage I and starts Stage II from it.
FoldResult run_fold(const RunConfig &cfg, const Dataset &ds, const data::FoldPlan &plan, const std::string &fold,
                    AuditLog *log = nullptr, const Model *stage1_init = nullptr);

/// Mean over sessions of the macro-mean r.
double mean_r(const std::vector<eval::MetricsReport> &reports);

} // namespace ndg::pipeline
