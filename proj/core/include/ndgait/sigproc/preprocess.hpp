// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "ndgait/sigproc/filters.hpp"

namespace ndg::sigproc {

/// Subtracts the across-channel mean at every time index.
Array common_average_reference(const Array &eeg);

/// Polyphase resampling with a Kaiser-windowed (beta = 8) low-pass.
/// Output length is round(T * fs_out / fs_in).
Array resample(const Array &signal, double fs_in, double fs_out);

struct JointStats {
    std::vector<double> means;
    std::vector<double> stds; // 0 recorded for constant rows
};

struct ZNormResult {
    Array joints;
    JointStats stats;
};

/// Per-row standardization with population std. Rows with zero spread use
/// divisor 1 and record std 0.
ZNormResult znorm_joints(const Array &joints);

/// Standardizes with previously computed statistics.
Array apply_znorm(const Array &joints, const JointStats &stats);

/// x * sigma + mu (sigma 0 treated as 1).
Array inverse_znorm(const Array &normalized, const JointStats &stats);

} // namespace ndg::sigproc
