// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ndgait/data/session.hpp"

namespace ndg::eval {

/// One a -> b -> c -> d -> next a chain (sample indices).
struct GaitCycle {
    std::size_t a, b, c, d, next_a;
};

/// a: left hip max flexion, b: left knee max flexion, c: right hip max
/// flexion, d: right knee max flexion. Only events that belong to a complete
/// chain are listed.
struct GaitEvents {
    std::vector<std::size_t> a, b, c, d;
    std::vector<GaitCycle> cycles;
    std::size_t dropped_cycles = 0; // a-to-a intervals without an ordered chain
    double period = 0;               // samples, from the hip_l autocorrelation
};

/// Period of a quasi-periodic signal: first autocorrelation peak after the
/// first negative lobe, refined by parabolic interpolation. Returns 0 when no
/// such peak exists.
double estimate_period(const double *x, std::size_t n);

/// Strict local maxima (plateaus report their midpoint), thinned so kept
/// peaks are at least min_sep apart, higher peaks first.
std::vector<std::size_t> find_peaks(const double *x, std::size_t n, double min_sep);

/// Throws NoEventsError for constant or peak-free signals and
/// InsufficientCyclesError when no complete chain exists.
GaitEvents detect_gait_events(const std::vector<double> &hip_l, const std::vector<double> &knee_l,
                              const std::vector<double> &hip_r, const std::vector<double> &knee_r);

/// Runs detect_gait_events on the hip_l, knee_l, hip_r and knee_r rows of a
/// session, looked up by joint name.
GaitEvents detect_session_events(const data::RawSession &s);

/// Labels 1..4 between consecutive events of every cycle, 0 elsewhere.
std::vector<std::uint8_t> assign_phases(const GaitEvents &events, std::size_t T);

/// Phase of a window is the phase of its final sample.
inline std::uint8_t window_phase(const std::vector<std::uint8_t> &labels, std::size_t t_end) {
    return t_end < labels.size() ? labels[t_end] : 0;
}

} // namespace ndg::eval
