// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/pipeline/stream.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "ndgait/error.hpp"
#include "ndgait/fusion/fusion.hpp"
#include "ndgait/sigproc/filters.hpp"

namespace ndg::pipeline {

namespace {

void require_samples(const LatencyStats &s) {
    if (s.samples_ms.empty()) throw ContractError("LatencyStats: no samples recorded");
}

} // namespace

double LatencyStats::mean() const {
    require_samples(*this);
    double s = 0;
    for (double v : samples_ms) s += v;
    return s / static_cast<double>(samples_ms.size());
}

double LatencyStats::p95() const {
    require_samples(*this);
    auto v = samples_ms;
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
    return v[std::min(k, v.size() - 1)];
}

double LatencyStats::max() const {
    require_samples(*this);
    return *std::max_element(samples_ms.begin(), samples_ms.end());
}

StreamResult stream_infer(Model &m, const data::RawSession &s, bool causal) {
    const auto &c = m.cfg;
    if (!m.has_heads()) throw ConfigError("stream_infer: model has no Stage II heads");
    if (s.fs != 200.0) throw ConfigError("stream_infer: session must be sampled at 200 Hz");
    if (s.channels() != c.net.channels)
        throw ShapeError("stream_infer: session has " + std::to_string(s.channels()) + " channels, model expects " +
                         std::to_string(c.net.channels));
    const std::size_t C = s.channels(), T = s.length(), W = c.stream.window, hop = c.stream.hop;
    const std::size_t J = m.heads.joints();

    StreamResult out;
    out.latency.budget_ms = c.stream.budget_ms;
    const std::size_t n_out = T >= W ? (T - W) / hop + 1 : 0;
    out.yhat = Tensor<double>({n_out, J});

    sigproc::FilterSpec spec;
    spec.mode = sigproc::FilterMode::StreamingCausal;
    sigproc::StreamingBandpass filt(C, s.fs, spec);
    std::vector<double> sample(C);
    std::vector<Real> ring(C * W); // column t % W holds sample t
    Tensor<Real> x({1, C, W});

    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t ch = 0; ch < C; ++ch) sample[ch] = s.eeg[ch * T + t];
        if (causal) {
            if (t == 0) filt.prime(sample.data());
            filt.process(sample.data());
            double mu = 0;
            for (double v : sample) mu += v;
            mu /= static_cast<double>(C);
            for (double &v : sample) v -= mu;
        }
        for (std::size_t ch = 0; ch < C; ++ch) ring[ch * W + t % W] = static_cast<Real>(sample[ch]);
        if (t + 1 < W || (t + 1 - W) % hop != 0) continue;

        const auto t0 = std::chrono::steady_clock::now();
        const std::size_t head = (t + 1) % W; // oldest sample of the window
        for (std::size_t ch = 0; ch < C; ++ch) {
            const Real *r = ring.data() + ch * W;
            Real *dst = x.ptr() + ch * W;
            std::copy(r + head, r + W, dst);
            std::copy(r, r + head, dst + (W - head));
        }
        Tape<Real> tape(0, false);
        const auto z = m.s1.eeg.forward(tape, tape.constant(x)).value();
        auto p = fusion::inference_predict(z, m.heads, m.scorer, c.ablation.no_fusion);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

        const std::size_t n = out.t_end.size();
        std::copy_n(p.yhat.ptr(), J, out.yhat.ptr() + n * J);
        out.t_end.push_back(t);
        out.entropy.push_back(p.entropy[0]);
        out.latency.samples_ms.push_back(ms);
    }
    return out;
}

void write_stream_csv(const StreamResult &r, const std::vector<std::string> &joint_names, const std::string &path) {
    const std::size_t J = r.yhat.rank() == 2 ? r.yhat.dim(1) : 0;
    if (joint_names.size() != J) throw ShapeError("write_stream_csv: joint name count mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path);
    os << "t_end";
    for (const auto &j : joint_names) os << ",yhat_" << j;
    os << ",entropy,latency_ms\n" << std::setprecision(9);
    for (std::size_t n = 0; n < r.t_end.size(); ++n) {
        os << r.t_end[n];
        for (std::size_t j = 0; j < J; ++j) os << ',' << r.yhat[n * J + j];
        os << ',' << r.entropy[n] << ',' << r.latency.samples_ms[n] << '\n';
    }
}

} // namespace ndg::pipeline
