// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ndgait/data/session.hpp"
#include "ndgait/fusion/fusion.hpp"
#include "ndgait/nets/networks.hpp"

namespace ndg::analysis {

using diff::Tape;
using diff::Tensor;
using diff::Var;

struct SaliencyMap {
    Tensor<double> S;          // [C×T], |d target / d x|
    std::vector<double> S_bar; // [C], mean of S over time
};

/// Scalar function of a single input x [C×T] recorded on the given tape.
template <class T> using SaliencyTarget = std::function<Var<T>(Tape<T> &, Var<T>)>;

template <class T> SaliencyMap saliency_map(const Tensor<T> &x, const SaliencyTarget<T> &target);

/// Saliency of the summed final-frame mixture prediction of encoder, heads and
/// scorer. With uniform = true the scorer is bypassed. Model parameters are
/// left untouched (including their gradient buffers).
template <class T>
SaliencyMap saliency_map(const nets::EEGEncoder<T> &encoder, const nets::SessionHeads<T> &heads,
                         const nets::DomainScorer<T> &scorer, const Tensor<T> &x, bool uniform = false);

/// channel,saliency rows.
void write_saliency_csv(const SaliencyMap &m, const std::vector<std::string> &channel_names,
                        const std::string &path);

using fusion::attention_entropy;

struct EntropyErrorRecord {
    std::size_t batch_id = 0;
    double mean_entropy = 0;  // nats
    double mean_l1_error = 0; // mean |yhat - y| over samples and joints
};

/// Splits a mixture prediction and its targets y [N×J] into consecutive
/// batches of batch_size samples (the last one may be shorter).
std::vector<EntropyErrorRecord> entropy_error_records(const fusion::MixturePrediction &pred, const Tensor<double> &y,
                                                      std::size_t batch_size);

struct EntropyErrorResult {
    double pcc = 0;
    std::vector<EntropyErrorRecord> table;
};

/// Pearson correlation between per-batch mean entropy and mean L1 error.
/// Throws UndefinedMetricError with fewer than 3 batches or a constant column.
EntropyErrorResult entropy_error_analysis(const std::vector<EntropyErrorRecord> &records);

void write_entropy_csv(const EntropyErrorResult &r, const std::string &path);

struct ExportStats {
    std::size_t rows = 0;
    std::size_t skipped = 0; // windows without a phase label
};

/// Writes z_0..z_{d-1},phase,subject_id,session_id,t_end for every window
/// with a gait phase label. Sessions whose gait events cannot be detected
/// contribute only skipped windows.
template <class T>
ExportStats export_embeddings(const nets::EEGEncoder<T> &encoder, const std::vector<data::SessionPtr> &sessions,
                              const std::string &path, std::size_t stride = data::kHop,
                              std::size_t batch_size = 64);

} // namespace ndg::analysis
