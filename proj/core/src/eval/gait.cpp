// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/eval/gait.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ndgait/error.hpp"

namespace ndg::eval {

double estimate_period(const double *x, std::size_t n) {
    if (n < 4) return 0;
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m += x[i];
    m /= static_cast<double>(n);
    auto ac = [&](std::size_t lag) {
        double s = 0;
        for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - m) * (x[i + lag] - m);
        return s / static_cast<double>(n - lag);
    };
    const double a0 = ac(0);
    if (!(a0 > 0)) return 0;
    const std::size_t max_lag = n / 2;
    bool negative = false;
    double prev2 = a0, prev = ac(1);
    for (std::size_t lag = 2; lag <= max_lag; ++lag) {
        const double cur = ac(lag);
        if (prev < 0) negative = true;
        if (negative && prev > 0 && prev >= prev2 && prev > cur) {
            const double den = prev2 - 2 * prev + cur;
            const double off = den != 0 ? 0.5 * (prev2 - cur) / den : 0.0;
            return static_cast<double>(lag - 1) + std::clamp(off, -0.5, 0.5);
        }
        prev2 = prev;
        prev = cur;
    }
    return 0;
}

std::vector<std::size_t> find_peaks(const double *x, std::size_t n, double min_sep) {
    std::vector<std::size_t> peaks;
    std::size_t i = 1;
    while (i + 1 < n) {
        if (x[i] > x[i - 1]) {
            std::size_t j = i;
            while (j + 1 < n && x[j + 1] == x[i]) ++j;
            if (j + 1 < n && x[j + 1] < x[i]) peaks.push_back((i + j) / 2);
            i = j + 1;
        } else {
            ++i;
        }
    }
    if (min_sep <= 1 || peaks.size() < 2) return peaks;
    std::vector<std::size_t> order(peaks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[peaks[a]] > x[peaks[b]]; });
    std::vector<bool> keep(peaks.size(), true);
    for (std::size_t k : order) {
        if (!keep[k]) continue;
        for (std::size_t l = k; l-- > 0 && static_cast<double>(peaks[k] - peaks[l]) < min_sep;) keep[l] = false;
        for (std::size_t l = k + 1; l < peaks.size() && static_cast<double>(peaks[l] - peaks[k]) < min_sep; ++l)
            keep[l] = false;
    }
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < peaks.size(); ++k)
        if (keep[k]) out.push_back(peaks[k]);
    return out;
}

namespace {

bool constant(const std::vector<double> &x) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

// first event strictly inside (lo, hi)
bool first_between(const std::vector<std::size_t> &ev, std::size_t lo, std::size_t hi, std::size_t &out) {
    auto it = std::upper_bound(ev.begin(), ev.end(), lo);
    if (it == ev.end() || *it >= hi) return false;
    out = *it;
    return true;
}

} // namespace

GaitEvents detect_gait_events(const std::vector<double> &hip_l, const std::vector<double> &knee_l,
                              const std::vector<double> &hip_r, const std::vector<double> &knee_r) {
    const std::size_t T = hip_l.size();
    if (knee_l.size() != T || hip_r.size() != T || knee_r.size() != T)
        throw ShapeError("detect_gait_events: signals differ in length");
    for (const auto *s : {&hip_l, &knee_l, &hip_r, &knee_r})
        if (s->empty() || constant(*s)) throw NoEventsError("detect_gait_events: constant signal");
    GaitEvents ev;
    ev.period = estimate_period(hip_l.data(), T);
    if (!(ev.period > 0)) throw NoEventsError("detect_gait_events: no periodicity in hip_l");
    const double sep = 0.4 * ev.period;
    const auto pa = find_peaks(hip_l.data(), T, sep), pb = find_peaks(knee_l.data(), T, sep),
               pc = find_peaks(hip_r.data(), T, sep), pd = find_peaks(knee_r.data(), T, sep);
    if (pa.empty() || pb.empty() || pc.empty() || pd.empty())
        throw NoEventsError("detect_gait_events: a signal has no peaks");
    for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
        GaitCycle c{pa[i], 0, 0, 0, pa[i + 1]};
        if (first_between(pb, c.a, c.next_a, c.b) && first_between(pc, c.b, c.next_a, c.c) &&
            first_between(pd, c.c, c.next_a, c.d)) {
            ev.cycles.push_back(c);
            ev.a.push_back(c.a);
            ev.b.push_back(c.b);
            ev.c.push_back(c.c);
            ev.d.push_back(c.d);
        } else {
            ++ev.dropped_cycles;
        }
    }
    if (ev.cycles.empty()) throw InsufficientCyclesError("detect_gait_events: no complete a-b-c-d chain");
    return ev;
}

GaitEvents detect_session_events(const data::RawSession &s) {
    auto row = [&](const char *name) {
        const auto it = std::find(s.joint_names.begin(), s.joint_names.end(), name);
        if (it == s.joint_names.end())
            throw MetadataMismatchError("session " + s.key() + " has no joint named " + name);
        const std::size_t j = static_cast<std::size_t>(it - s.joint_names.begin()), T = s.length();
        return std::vector<double>(s.joints.ptr() + j * T, s.joints.ptr() + (j + 1) * T);
    };
    return detect_gait_events(row("hip_l"), row("knee_l"), row("hip_r"), row("knee_r"));
}

std::vector<std::uint8_t> assign_phases(const GaitEvents &events, std::size_t T) {
    std::vector<std::uint8_t> lab(T, 0);
    for (const auto &c : events.cycles) {
        const std::size_t bounds[5] = {c.a, c.b, c.c, c.d, c.next_a};
        for (std::uint8_t p = 0; p < 4; ++p)
            for (std::size_t t = bounds[p]; t < std::min(bounds[p + 1], T); ++t) lab[t] = static_cast<std::uint8_t>(p + 1);
    }
    return lab;
}

} // namespace ndg::eval
