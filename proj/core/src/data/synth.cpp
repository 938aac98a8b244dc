// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/data/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "ndgait/error.hpp"
#include "ndgait/rng.hpp"
#include "ndgait/sigproc/filters.hpp"

namespace ndg::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Periodic joint shape w(u) = cos u + h2 cos(2u + p2) + h3 cos(3u + p3).
struct Shape {
    double amp = 1, offset = 0, lag = 0;
    double h2 = 0, p2 = 0, h3 = 0, p3 = 0;
    double peak = 0; // u at the maximum of w

    double w(double u) const { return std::cos(u) + h2 * std::cos(2 * u + p2) + h3 * std::cos(3 * u + p3); }
    double dw(double u) const {
        return -std::sin(u) - 2 * h2 * std::sin(2 * u + p2) - 3 * h3 * std::sin(3 * u + p3);
    }
    double angle(double phi) const { return offset + amp * w(phi - lag); }
    // Phase (mod 2pi) at which the angle peaks.
    double peak_phase() const { return std::fmod(lag + peak + 10 * kTwoPi, kTwoPi); }
};

int count_maxima(const Shape &s, int grid) {
    int n = 0;
    for (int i = 0; i < grid; ++i) {
        const double a = s.w(kTwoPi * (i - 1) / grid), b = s.w(kTwoPi * i / grid), c = s.w(kTwoPi * (i + 1) / grid);
        if (b > a && b >= c) ++n;
    }
    return n;
}

double locate_peak(const Shape &s) {
    constexpr int grid = 4096;
    int best = 0;
    for (int i = 1; i < grid; ++i)
        if (s.w(kTwoPi * i / grid) > s.w(kTwoPi * best / grid)) best = i;
    double lo = kTwoPi * (best - 1) / grid, hi = kTwoPi * (best + 1) / grid;
    // dw is decreasing through the peak
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (s.dw(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Shape draw_shape(Rng &rng, double amp_lo, double amp_hi, double offset) {
    Shape s;
    s.amp = rng.uniform(amp_lo, amp_hi);
    s.offset = offset;
    s.h2 = rng.uniform(0.0, 0.12);
    s.p2 = rng.uniform(0.0, kTwoPi);
    s.h3 = rng.uniform(0.0, 0.06);
    s.p3 = rng.uniform(0.0, kTwoPi);
    while (count_maxima(s, 2048) != 1) {
        s.h2 *= 0.5;
        s.h3 *= 0.5;
    }
    s.peak = locate_peak(s);
    return s;
}

struct PhaseModel {
    double cadence, wobble, period, psi, phi0;

    double phase(double t) const {
        return phi0 + kTwoPi * cadence *
                          (t + wobble * period / kTwoPi * (std::cos(psi) - std::cos(kTwoPi * t / period + psi)));
    }
    double rate(double t) const { return kTwoPi * cadence * (1 + wobble * std::sin(kTwoPi * t / period + psi)); }

    // Times (in samples) in [0, T) where phase == target (mod 2pi).
    std::vector<double> crossings(double target, std::size_t T, double fs) const {
        std::vector<double> out;
        const double t_end = static_cast<double>(T - 1) / fs;
        const double first = std::ceil((phase(0) - target) / kTwoPi);
        for (double m = first;; m += 1) {
            const double goal = target + kTwoPi * m;
            if (goal > phase(t_end)) break;
            double lo = 0, hi = t_end;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                (phase(mid) < goal ? lo : hi) = mid;
            }
            out.push_back(0.5 * (lo + hi) * fs);
        }
        return out;
    }
};

std::string two_digit(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02zu", i);
    return buf;
}

} // namespace

std::vector<std::string> synth_joint_names(std::size_t joints) {
    if (joints == 6) return {"hip_l", "knee_l", "ankle_l", "hip_r", "knee_r", "ankle_r"};
    if (joints == 8) return {"hip_l", "knee_l", "ankle_l", "mtp_l", "hip_r", "knee_r", "ankle_r", "mtp_r"};
    throw ConfigError("synthetic generator supports 6 or 8 joints, got " + std::to_string(joints));
}

SynthSubject generate_synthetic_subject_with_truth(std::uint64_t seed, const SynthConfig &cfg,
                                                   const std::string &subject_id) {
    const auto joint_names = synth_joint_names(cfg.joints);
    if (cfg.channels < 2) throw ConfigError("synthetic generator needs at least 2 channels");
    if (cfg.sessions < 1) throw ConfigError("synthetic generator needs at least 1 session");
    if (!(cfg.cadence_lo > 0 && cfg.cadence_hi >= cfg.cadence_lo)) throw ConfigError("invalid cadence range");
    if (!(cfg.fs > 0) || !(cfg.duration_s > 0)) throw ConfigError("invalid duration or sampling rate");
    if (!(cfg.cadence_wobble >= 0 && cfg.cadence_wobble < 0.5)) throw ConfigError("cadence wobble must be in [0, 0.5)");

    const std::size_t C = cfg.channels, J = cfg.joints, per_leg = J / 2;
    const auto T = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.fs));
    Rng rng(seed);

    const double cadence = rng.uniform(cfg.cadence_lo, cfg.cadence_hi);
    // left-leg shapes; right leg is the same shape half a cycle later
    std::vector<Shape> leg(per_leg);
    leg[0] = draw_shape(rng, 15.0, 22.0, 10.0);
    leg[0].lag = -leg[0].peak; // hip peak at phase 0
    leg[1] = draw_shape(rng, 27.0, 33.0, 30.0);
    const double knee_delay = kTwoPi * rng.uniform(0.2, 0.3);
    leg[1].lag = knee_delay - leg[1].peak;
    leg[2] = draw_shape(rng, 8.0, 14.0, 0.0);
    leg[2].lag = rng.uniform(0.0, kTwoPi);
    if (per_leg == 4) {
        leg[3] = draw_shape(rng, 10.0, 15.0, 5.0);
        leg[3].lag = rng.uniform(0.0, kTwoPi);
    }

    std::vector<double> mix(C * J);
    {
        Rng shared(derive_seed(cfg.cohort_seed, 0x5eed));
        const double sc = 1.0 / std::sqrt(static_cast<double>(J));
        for (auto &m : mix) m = shared.normal() * sc;
        for (auto &m : mix) m += cfg.subject_mix_spread * rng.normal() * sc;
    }

    const sigproc::Sos noise_sos = sigproc::butter_bandpass(2, 1.0, std::min(40.0, 0.4 * cfg.fs), cfg.fs);

    SynthSubject out;
    const std::string sid = subject_id.empty() ? "S" + std::to_string(seed) : subject_id;
    for (std::size_t s = 0; s < cfg.sessions; ++s) {
        PhaseModel pm{cadence, cfg.cadence_wobble, rng.uniform(20.0, 40.0), rng.uniform(0.0, kTwoPi),
                      rng.uniform(0.0, kTwoPi)};

        RawSession rs;
        rs.subject_id = sid;
        rs.session_id = "ses" + std::to_string(s + 1);
        rs.fs = cfg.fs;
        rs.joint_names = joint_names;
        for (std::size_t c = 0; c < C; ++c) rs.channel_names.push_back("E" + two_digit(c + 1));
        rs.joints = diff::Tensor<float>({J, T});
        rs.eeg = diff::Tensor<float>({C, T});

        std::vector<double> src(J * T);
        for (std::size_t t = 0; t < T; ++t) {
            const double sec = static_cast<double>(t) / cfg.fs;
            const double phi = pm.phase(sec);
            const double lead_sec = sec + cfg.eeg_lead_s;
            const double phi_lead = pm.phase(lead_sec);
            const double rate = pm.rate(lead_sec) / (kTwoPi * cadence);
            for (std::size_t side = 0; side < 2; ++side) {
                const double off = side ? std::numbers::pi : 0.0;
                for (std::size_t k = 0; k < per_leg; ++k) {
                    const std::size_t j = side * per_leg + k;
                    rs.joints[j * T + t] = static_cast<float>(leg[k].angle(phi - off));
                    src[j * T + t] = leg[k].dw(phi_lead - off - leg[k].lag) * rate;
                }
            }
        }

        std::vector<double> gain(C), gphase(C), gperiod(C);
        for (std::size_t c = 0; c < C; ++c) {
            gain[c] = std::exp(cfg.session_gain_spread * rng.normal());
            gphase[c] = rng.uniform(0.0, kTwoPi);
            gperiod[c] = rng.uniform(30.0, 90.0);
        }
        const double af1 = rng.uniform(0.3, 1.0), af2 = rng.uniform(1.5, 3.0);
        const double ap1 = rng.uniform(0.0, kTwoPi), ap2 = rng.uniform(0.0, kTwoPi);

        for (std::size_t c = 0; c < C; ++c) {
            std::vector<double> noise(T);
            for (auto &v : noise) v = rng.normal();
            noise = sigproc::sosfilt(noise_sos, noise);
            double ss = 0;
            for (double v : noise) ss += v * v;
            const double nscale = ss > 0 ? cfg.noise_std / std::sqrt(ss / static_cast<double>(T)) : 0.0;

            double df[3], dp[3], da[3];
            for (int k = 0; k < 3; ++k) {
                df[k] = rng.uniform(0.005, 0.05);
                dp[k] = rng.uniform(0.0, kTwoPi);
                da[k] = cfg.drift_amp * rng.uniform(0.5, 1.0);
            }
            for (std::size_t t = 0; t < T; ++t) {
                const double sec = static_cast<double>(t) / cfg.fs;
                double sig = 0;
                for (std::size_t j = 0; j < J; ++j) sig += mix[c * J + j] * src[j * T + t];
                const double g = gain[c] * (1.0 + cfg.gain_drift * std::sin(kTwoPi * sec / gperiod[c] + gphase[c]));
                const double artifact = cfg.artifact_amp * (0.6 * std::sin(kTwoPi * af1 * sec + ap1) +
                                                            0.4 * std::sin(kTwoPi * af2 * sec + ap2));
                double drift = 0;
                for (int k = 0; k < 3; ++k) drift += da[k] * std::sin(kTwoPi * df[k] * sec + dp[k]);
                rs.eeg[c * T + t] = static_cast<float>(g * (sig + nscale * noise[t]) + artifact + drift);
            }
        }

        EventTruth ev;
        ev.times[0] = pm.crossings(leg[0].peak_phase(), T, cfg.fs);
        ev.times[1] = pm.crossings(leg[1].peak_phase(), T, cfg.fs);
        ev.times[2] = pm.crossings(std::fmod(leg[0].peak_phase() + std::numbers::pi, kTwoPi), T, cfg.fs);
        ev.times[3] = pm.crossings(std::fmod(leg[1].peak_phase() + std::numbers::pi, kTwoPi), T, cfg.fs);

        out.sessions.push_back(std::move(rs));
        out.events.push_back(std::move(ev));
    }
    return out;
}

std::vector<RawSession> generate_synthetic_subject(std::uint64_t seed, const SynthConfig &cfg,
                                                   const std::string &subject_id) {
    return generate_synthetic_subject_with_truth(seed, cfg, subject_id).sessions;
}

std::vector<SynthSubject> generate_synthetic_cohort(std::size_t subjects, std::uint64_t seed, const SynthConfig &cfg) {
    std::vector<SynthSubject> out;
    out.reserve(subjects);
    for (std::size_t i = 0; i < subjects; ++i)
        out.push_back(generate_synthetic_subject_with_truth(derive_seed(seed, i), cfg, "S" + two_digit(i + 1)));
    return out;
}

} // namespace ndg::data
