// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/sigproc/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace ndg::sigproc {

namespace {

using cd = std::complex<double>;

void validate(const FilterSpec &spec, double fs) {
    if (!(fs > 0)) throw ConfigError("bandpass: sampling rate must be positive");
    if (spec.order < 1) throw ConfigError("bandpass: order must be >= 1");
    if (!(spec.f_lo > 0)) throw ConfigError("bandpass: f_lo must be > 0");
    if (!(spec.f_lo < spec.f_hi)) throw ConfigError("bandpass: f_lo must be < f_hi");
    if (!(spec.f_hi < fs / 2))
        throw ConfigError("bandpass: f_hi " + std::to_string(spec.f_hi) + " Hz is not below Nyquist " +
                          std::to_string(fs / 2) + " Hz");
}

cd section_response(const Biquad &s, cd zinv) {
    const cd num = s.b[0] + zinv * (s.b[1] + zinv * s.b[2]);
    const cd den = s.a[0] + zinv * (s.a[1] + zinv * s.a[2]);
    return num / den;
}

// Steady-state DF2T state of one section under a unit constant input.
std::array<double, 2> unit_zi(const Biquad &s) {
    const double y = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[1] + s.a[2]);
    const double z1 = s.b[2] - s.a[2] * y;
    const double z0 = s.b[1] - s.a[1] * y + z1;
    return {z0, z1};
}

std::vector<double> cascade_zi(const Sos &sos) {
    std::vector<double> zi(2 * sos.size());
    double scale = 1.0;
    for (std::size_t i = 0; i < sos.size(); ++i) {
        const auto z = unit_zi(sos[i]);
        zi[2 * i] = z[0] * scale;
        zi[2 * i + 1] = z[1] * scale;
        const auto &s = sos[i];
        scale *= (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[1] + s.a[2]);
    }
    return zi;
}

// In-place DF2T cascade with explicit state.
void run(const Sos &sos, std::vector<double> &x, std::vector<double> &state) {
    for (std::size_t k = 0; k < sos.size(); ++k) {
        const auto &s = sos[k];
        double z0 = state[2 * k], z1 = state[2 * k + 1];
        for (double &v : x) {
            const double in = v;
            const double y = s.b[0] * in + z0;
            z0 = s.b[1] * in - s.a[1] * y + z1;
            z1 = s.b[2] * in - s.a[2] * y;
            v = y;
        }
        state[2 * k] = z0;
        state[2 * k + 1] = z1;
    }
}

} // namespace

Sos butter_bandpass(int order, double f_lo, double f_hi, double fs) {
    FilterSpec spec;
    spec.order = order;
    spec.f_lo = f_lo;
    spec.f_hi = f_hi;
    validate(spec, fs);
    const double pi = std::numbers::pi;
    const double fs2 = 2.0 * fs;
    const double wl = fs2 * std::tan(pi * f_lo / fs);
    const double wh = fs2 * std::tan(pi * f_hi / fs);
    const double bw = wh - wl;
    const double w0 = std::sqrt(wl * wh);

    std::vector<cd> zp;
    for (int k = 0; k < order; ++k) {
        const cd p = std::polar(1.0, pi * (2.0 * k + order + 1) / (2.0 * order));
        const cd half = p * (bw / 2.0);
        const cd root = std::sqrt(half * half - w0 * w0);
        for (cd s : {half + root, half - root}) zp.push_back((fs2 + s) / (fs2 - s));
    }

    std::vector<cd> complex_poles;
    std::vector<double> real_poles;
    for (const cd &p : zp) {
        if (std::abs(p.imag()) > 1e-12 * std::max(1.0, std::abs(p))) {
            if (p.imag() > 0) complex_poles.push_back(p);
        } else {
            real_poles.push_back(p.real());
        }
    }
    std::sort(real_poles.begin(), real_poles.end());

    Sos sos;
    for (const cd &p : complex_poles) {
        Biquad s;
        s.b = {1.0, 0.0, -1.0};
        s.a = {1.0, -2.0 * p.real(), std::norm(p)};
        sos.push_back(s);
    }
    for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
        Biquad s;
        s.b = {1.0, 0.0, -1.0};
        s.a = {1.0, -(real_poles[i] + real_poles[i + 1]), real_poles[i] * real_poles[i + 1]};
        sos.push_back(s);
    }
    if (sos.size() != static_cast<std::size_t>(order))
        throw NumericError("butter_bandpass: unexpected pole configuration");

    const double wc = 2.0 * std::atan(w0 / fs2);
    const cd zinv = std::polar(1.0, -wc);
    cd h = 1.0;
    for (const auto &s : sos) h *= section_response(s, zinv);
    const double g = std::pow(1.0 / std::abs(h), 1.0 / static_cast<double>(order));
    for (auto &s : sos)
        for (auto &b : s.b) b *= g;
    return sos;
}

double sos_gain(const Sos &sos, double f, double fs) {
    const cd zinv = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);
    cd h = 1.0;
    for (const auto &s : sos) h *= section_response(s, zinv);
    return std::abs(h);
}

std::size_t filtfilt_padlen(const Sos &sos) {
    std::size_t zb = 0, za = 0;
    for (const auto &s : sos) {
        zb += s.b[2] == 0.0;
        za += s.a[2] == 0.0;
    }
    return 3 * (2 * sos.size() + 1 - std::min(zb, za));
}

std::vector<double> sosfilt(const Sos &sos, const std::vector<double> &x) {
    std::vector<double> y = x;
    std::vector<double> state(2 * sos.size(), 0.0);
    run(sos, y, state);
    return y;
}

std::vector<double> sosfiltfilt(const Sos &sos, const std::vector<double> &x) {
    const std::size_t pad = filtfilt_padlen(sos);
    const std::size_t n = x.size();
    if (n <= pad)
        throw InputError("bandpass: signal length " + std::to_string(n) + " must exceed " +
                         std::to_string(pad) + " samples");
    std::vector<double> ext(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
    std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
    for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

    const std::vector<double> zi = cascade_zi(sos);
    std::vector<double> state(zi.size());
    for (std::size_t i = 0; i < zi.size(); ++i) state[i] = zi[i] * ext.front();
    run(sos, ext, state);
    std::reverse(ext.begin(), ext.end());
    for (std::size_t i = 0; i < zi.size(); ++i) state[i] = zi[i] * ext.front();
    run(sos, ext, state);
    std::reverse(ext.begin(), ext.end());
    return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                               ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

Array bandpass(const Array &signal, double fs, const FilterSpec &spec) {
    validate(spec, fs);
    if (signal.rank() != 2) throw ShapeError("bandpass: expects [C×T]");
    const Sos sos = butter_bandpass(spec.order, spec.f_lo, spec.f_hi, fs);
    const std::size_t C = signal.dim(0), T = signal.dim(1);
    const std::size_t pad = filtfilt_padlen(sos);
    if (T <= pad)
        throw InputError("bandpass: " + std::to_string(T) + " samples is too short (need > " +
                         std::to_string(pad) + ")");
    Array out(signal.shape);
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<double> row(signal.ptr() + c * T, signal.ptr() + (c + 1) * T);
        std::vector<double> y;
        if (spec.mode == FilterMode::StreamingCausal) {
            y = sosfilt(sos, row);
        } else {
            y = sosfiltfilt(sos, row);
            std::reverse(row.begin(), row.end());
            std::vector<double> yr = sosfiltfilt(sos, row);
            for (std::size_t t = 0; t < T; ++t) y[t] = 0.5 * (y[t] + yr[T - 1 - t]);
        }
        std::copy(y.begin(), y.end(), out.ptr() + c * T);
    }
    return out;
}

StreamingBandpass::StreamingBandpass(std::size_t channels, double fs, const FilterSpec &spec)
    : sos_(butter_bandpass(spec.order, spec.f_lo, spec.f_hi, fs)), channels_(channels),
      state_(channels * 2 * sos_.size(), 0.0), zi_(cascade_zi(sos_)) {}

void StreamingBandpass::reset() { std::fill(state_.begin(), state_.end(), 0.0); }

void StreamingBandpass::prime(const double *first) {
    const std::size_t per = 2 * sos_.size();
    for (std::size_t c = 0; c < channels_; ++c)
        for (std::size_t i = 0; i < per; ++i) state_[c * per + i] = zi_[i] * first[c];
}

void StreamingBandpass::process(double *sample) {
    const std::size_t per = 2 * sos_.size();
    for (std::size_t c = 0; c < channels_; ++c) {
        double v = sample[c];
        double *st = state_.data() + c * per;
        for (std::size_t k = 0; k < sos_.size(); ++k) {
            const auto &s = sos_[k];
            const double y = s.b[0] * v + st[2 * k];
            st[2 * k] = s.b[1] * v - s.a[1] * y + st[2 * k + 1];
            st[2 * k + 1] = s.b[2] * v - s.a[2] * y;
            v = y;
        }
        sample[c] = v;
    }
}

} // namespace ndg::sigproc
