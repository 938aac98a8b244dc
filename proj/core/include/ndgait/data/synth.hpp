// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ndgait/data/session.hpp"

namespace ndg::data {

struct SynthConfig {
    std::size_t channels = 16;
    std::size_t joints = 6; // 6: hip/knee/ankle per leg, 8 adds mtp per leg
    std::size_t sessions = 2;
    double duration_s = 120.0;
    double fs = 200.0;
    double cadence_lo = 0.8; // strides per second
    double cadence_hi = 1.1;
    double cadence_wobble = 0.05;
    std::uint64_t cohort_seed = 7; // shared mixing pattern across subjects
    double subject_mix_spread = 0.3;
    double session_gain_spread = 0.2;
    double gain_drift = 0.05;
    double noise_std = 1.0;
    double artifact_amp = 2.0;
    double drift_amp = 0.5;
    double eeg_lead_s = 0.0;
};

/// Event sample times (fractional) for one session, indexed
/// 0: left hip max flexion, 1: left knee max flexion,
/// 2: right hip max flexion, 3: right knee max flexion.
struct EventTruth {
    std::array<std::vector<double>, 4> times;
};

struct SynthSubject {
    std::vector<RawSession> sessions;
    std::vector<EventTruth> events;
};

std::vector<std::string> synth_joint_names(std::size_t joints);

/// Raw sessions (degrees, unfiltered EEG) for one subject plus the exact
/// event times implied by the phase model. Deterministic in seed.
SynthSubject generate_synthetic_subject_with_truth(std::uint64_t seed, const SynthConfig &cfg,
                                                   const std::string &subject_id = "");

std::vector<RawSession> generate_synthetic_subject(std::uint64_t seed, const SynthConfig &cfg,
                                                   const std::string &subject_id = "");

/// Subjects S01..Snn with per-subject seeds derived from `seed`.
std::vector<SynthSubject> generate_synthetic_cohort(std::size_t subjects, std::uint64_t seed, const SynthConfig &cfg);

} // namespace ndg::data
