// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "ndgait/pipeline/model.hpp"
#include "ndgait/data/session.hpp"

namespace ndg::pipeline {

struct LatencyStats {
    std::vector<double> samples_ms; // one per emitted window
    double budget_ms = 50.0;

    /// These throw ContractError before the first sample.
    double mean() const;
    double p95() const;
    double max() const;
    bool within_budget() const { return mean() < budget_ms; }
};

struct StreamResult {
    std::vector<std::size_t> t_end;
    Tensor<double> yhat; // [N×J]
    std::vector<double> entropy;
    LatencyStats latency;
};

/// Replays a session sample by sample. With causal = true each sample passes
/// the streaming bandpass and common average reference first; otherwise the
/// session is taken as already preprocessed. After the first window fills, a
/// prediction is emitted every stream.hop samples and the wall-clock time of
/// window assembly plus the forward pass is recorded. The session must be
/// sampled at the model rate (200 Hz).
StreamResult stream_infer(Model &m, const data::RawSession &s, bool causal = true);

/// t_end,yhat_<joint>...,entropy,latency_ms
void write_stream_csv(const StreamResult &r, const std::vector<std::string> &joint_names, const std::string &path);

} // namespace ndg::pipeline
