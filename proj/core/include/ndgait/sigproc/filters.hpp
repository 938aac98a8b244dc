// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "ndgait/diff/tensor.hpp"

namespace ndg::sigproc {

using Array = diff::Tensor<double>;

enum class FilterMode { OfflineZeroPhase, StreamingCausal };

struct FilterSpec {
    double f_lo = 0.1;
    double f_hi = 48.0;
    int order = 4;
    FilterMode mode = FilterMode::OfflineZeroPhase;
};

/// One biquad: b0 b1 b2 / 1 a1 a2.
struct Biquad {
    std::array<double, 3> b{};
    std::array<double, 3> a{1.0, 0.0, 0.0};
};

using Sos = std::vector<Biquad>;

/// Digital Butterworth bandpass (bilinear transform with prewarping), gain
/// normalized to 1 at the geometric center frequency.
Sos butter_bandpass(int order, double f_lo, double f_hi, double fs);

/// Complex frequency response magnitude at frequency f (Hz).
double sos_gain(const Sos &sos, double f, double fs);

/// Edge padding used by the forward-backward filter.
std::size_t filtfilt_padlen(const Sos &sos);

/// Causal single pass over one channel, zero initial state.
std::vector<double> sosfilt(const Sos &sos, const std::vector<double> &x);

/// Forward-backward pass with odd extension and steady-state initial
/// conditions.
std::vector<double> sosfiltfilt(const Sos &sos, const std::vector<double> &x);

/// Bandpass every row of a [C×T] signal according to spec.mode. The offline
/// mode averages the forward-backward result of x and of its time reversal,
/// which makes it exactly reversal-equivariant.
Array bandpass(const Array &signal, double fs, const FilterSpec &spec = {});

/// Sample-by-sample causal bandpass for multichannel streams.
class StreamingBandpass {
public:
    StreamingBandpass(std::size_t channels, double fs, const FilterSpec &spec = {});

    /// Initializes the state to the steady-state response of a constant input
    /// equal to `first`.
    void prime(const double *first);
    void reset();
    /// Filters one multichannel sample in place.
    void process(double *sample);

    std::size_t channels() const { return channels_; }

private:
    Sos sos_;
    std::size_t channels_;
    std::vector<double> state_; // [C][section][2]
    std::vector<double> zi_;    // unit-step steady state per section
};

} // namespace ndg::sigproc
