// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ndgait/data/session.hpp"
#include "ndgait/sigproc/filters.hpp"
#include "ndgait/sigproc/preprocess.hpp"

namespace ndg::data {

struct PreprocessConfig {
    double fs_target = 200.0;
    sigproc::FilterSpec filter{};
    bool car = true;
    bool znorm = true;
};

struct PreprocessResult {
    RawSession session;
    sigproc::JointStats joint_stats;
};

/// Bandpass and CAR at the recording rate, resample EEG and joints to
/// fs_target, then z-normalize each joint over the session.
PreprocessResult preprocess_session(const RawSession &raw, const PreprocessConfig &cfg = {});

} // namespace ndg::data
