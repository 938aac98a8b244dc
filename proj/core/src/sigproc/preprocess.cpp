// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/sigproc/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace ndg::sigproc {

Array common_average_reference(const Array &eeg) {
    if (eeg.rank() != 2) throw ShapeError("common_average_reference: expects [C×T]");
    const std::size_t C = eeg.dim(0), T = eeg.dim(1);
    if (C < 2) throw InputError("common_average_reference: needs at least 2 channels");
    Array out = eeg;
    for (std::size_t t = 0; t < T; ++t) {
        double m = 0;
        for (std::size_t c = 0; c < C; ++c) m += eeg[c * T + t];
        m /= static_cast<double>(C);
        for (std::size_t c = 0; c < C; ++c) out[c * T + t] -= m;
    }
    return out;
}

namespace {

long long to_milli_hz(double fs) {
    if (!(fs > 0) || !std::isfinite(fs)) throw ConfigError("resample: sampling rates must be positive");
    return std::llround(fs * 1000.0);
}

std::vector<double> kaiser_lowpass(std::size_t half_len, double cutoff, double beta, double gain) {
    const std::size_t n = 2 * half_len + 1;
    std::vector<double> h(n);
    const double denom = std::cyl_bessel_i(0.0, beta);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = static_cast<double>(i) - static_cast<double>(half_len);
        const double arg = std::numbers::pi * cutoff * m;
        const double sinc = m == 0.0 ? 1.0 : std::sin(arg) / arg;
        const double r = m / static_cast<double>(half_len);
        const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
        h[i] = cutoff * sinc * w;
        sum += h[i];
    }
    for (auto &v : h) v *= gain / sum;
    return h;
}

} // namespace

Array resample(const Array &signal, double fs_in, double fs_out) {
    if (signal.rank() != 2) throw ShapeError("resample: expects [C×T]");
    const long long a = to_milli_hz(fs_in), b = to_milli_hz(fs_out);
    if (a == b) return signal;
    const long long g = std::gcd(a, b);
    const std::size_t up = static_cast<std::size_t>(b / g);
    const std::size_t down = static_cast<std::size_t>(a / g);
    const std::size_t C = signal.dim(0), T = signal.dim(1);
    const std::size_t T_out =
        static_cast<std::size_t>(std::llround(static_cast<double>(T) * static_cast<double>(up) /
                                              static_cast<double>(down)));
    const std::size_t mx = std::max(up, down);
    const std::size_t half = 10 * mx;
    const std::vector<double> h = kaiser_lowpass(half, 1.0 / static_cast<double>(mx), 8.0,
                                                 static_cast<double>(up));
    Array out({C, T_out});
    for (std::size_t c = 0; c < C; ++c) {
        const double *x = signal.ptr() + c * T;
        for (std::size_t m = 0; m < T_out; ++m) {
            // taps n = m*down + half - k*up must lie in [0, 2*half]
            const long long center = static_cast<long long>(m * down + half);
            long long k_lo = center - static_cast<long long>(2 * half);
            k_lo = k_lo <= 0 ? 0 : (k_lo + static_cast<long long>(up) - 1) / static_cast<long long>(up);
            long long k_hi = center / static_cast<long long>(up);
            k_hi = std::min<long long>(k_hi, static_cast<long long>(T) - 1);
            double acc = 0;
            for (long long k = k_lo; k <= k_hi; ++k)
                acc += x[k] * h[static_cast<std::size_t>(center - k * static_cast<long long>(up))];
            out[c * T_out + m] = acc;
        }
    }
    return out;
}

ZNormResult znorm_joints(const Array &joints) {
    if (joints.rank() != 2) throw ShapeError("znorm_joints: expects [J×T]");
    const std::size_t J = joints.dim(0), T = joints.dim(1);
    if (T < 2) throw InputError("znorm_joints: needs at least 2 samples");
    JointStats st;
    st.means.resize(J);
    st.stds.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
        const double *r = joints.ptr() + j * T;
        double mu = 0;
        for (std::size_t t = 0; t < T; ++t) mu += r[t];
        mu /= static_cast<double>(T);
        double var = 0;
        for (std::size_t t = 0; t < T; ++t) var += (r[t] - mu) * (r[t] - mu);
        const double sd = std::sqrt(var / static_cast<double>(T));
        st.means[j] = mu;
        st.stds[j] = sd <= 1e-12 * std::max(1.0, std::abs(mu)) ? 0.0 : sd;
    }
    Array out = apply_znorm(joints, st);
    for (std::size_t j = 0; j < J; ++j)
        if (st.stds[j] == 0.0) std::fill(out.ptr() + j * T, out.ptr() + (j + 1) * T, 0.0);
    return {std::move(out), st};
}

Array apply_znorm(const Array &joints, const JointStats &stats) {
    const std::size_t J = joints.dim(0), T = joints.dim(1);
    if (stats.means.size() != J || stats.stds.size() != J)
        throw ShapeError("apply_znorm: statistics do not match joint count");
    Array out(joints.shape);
    for (std::size_t j = 0; j < J; ++j) {
        const double div = stats.stds[j] == 0.0 ? 1.0 : stats.stds[j];
        for (std::size_t t = 0; t < T; ++t)
            out[j * T + t] = (joints[j * T + t] - stats.means[j]) / div;
    }
    return out;
}

Array inverse_znorm(const Array &normalized, const JointStats &stats) {
    const std::size_t J = normalized.dim(0), T = normalized.dim(1);
    if (stats.means.size() != J || stats.stds.size() != J)
        throw ShapeError("inverse_znorm: statistics do not match joint count");
    Array out(normalized.shape);
    for (std::size_t j = 0; j < J; ++j) {
        const double mul = stats.stds[j] == 0.0 ? 1.0 : stats.stds[j];
        for (std::size_t t = 0; t < T; ++t)
            out[j * T + t] = normalized[j * T + t] * mul + stats.means[j];
    }
    return out;
}

} // namespace ndg::sigproc
