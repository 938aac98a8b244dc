// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/analysis/analysis.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "ndgait/error.hpp"
#include "ndgait/eval/gait.hpp"
#include "ndgait/eval/metrics.hpp"

namespace ndg::analysis {

namespace {

template <class T, class M> void freeze(M &m) {
    m.visit([](diff::Parameter<T> &p, bool) {
        p.trainable = false;
        p.grad = Tensor<T>();
    });
}

std::ofstream open_out(const std::string &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path);
    return os;
}

} // namespace

template <class T> SaliencyMap saliency_map(const Tensor<T> &x, const SaliencyTarget<T> &target) {
    if (x.rank() != 2) throw ShapeError("saliency_map: input must be [C×T], got " + diff::shape_str(x.shape));
    Tape<T> tape;
    auto xv = tape.leaf(x);
    auto y = target(tape, xv);
    if (y.size() != 1) throw ShapeError("saliency_map: target must be scalar");
    tape.backward(y);
    const auto &g = tape.grad(xv);
    const std::size_t C = x.dim(0), L = x.dim(1);
    SaliencyMap m;
    m.S = Tensor<double>({C, L});
    m.S_bar.assign(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        double s = 0;
        for (std::size_t t = 0; t < L; ++t) {
            const double v = std::abs(static_cast<double>(g[c * L + t]));
            m.S[c * L + t] = v;
            s += v;
        }
        m.S_bar[c] = s / static_cast<double>(L);
    }
    return m;
}

template <class T>
SaliencyMap saliency_map(const nets::EEGEncoder<T> &encoder, const nets::SessionHeads<T> &heads,
                         const nets::DomainScorer<T> &scorer, const Tensor<T> &x, bool uniform) {
    auto enc = encoder;
    auto hd = heads;
    auto sc = scorer;
    freeze<T>(enc);
    freeze<T>(hd);
    freeze<T>(sc);
    return saliency_map<T>(x, [&](Tape<T> &tape, Var<T> xv) {
        auto z = enc.forward(tape, diff::reshape(xv, {1, x.dim(0), x.dim(1)}));
        auto H = hd.forward(tape, z);
        const std::size_t K = hd.count();
        Var<T> alpha = uniform ? tape.constant(Tensor<T>({1, K}, T(1) / static_cast<T>(K)))
                               : fusion::domain_weights(sc.forward(tape, z), {});
        return diff::sum(fusion::mixture_predict(H, alpha));
    });
}

void write_saliency_csv(const SaliencyMap &m, const std::vector<std::string> &channel_names,
                        const std::string &path) {
    if (channel_names.size() != m.S_bar.size())
        throw ShapeError("write_saliency_csv: " + std::to_string(channel_names.size()) + " names for " +
                         std::to_string(m.S_bar.size()) + " channels");
    auto os = open_out(path);
    os << "channel,saliency\n" << std::setprecision(9);
    for (std::size_t c = 0; c < m.S_bar.size(); ++c) os << channel_names[c] << ',' << m.S_bar[c] << '\n';
}

std::vector<EntropyErrorRecord> entropy_error_records(const fusion::MixturePrediction &pred, const Tensor<double> &y,
                                                      std::size_t batch_size) {
    if (batch_size == 0) throw ConfigError("entropy_error_records: batch_size must be >= 1");
    if (pred.yhat.shape != y.shape || y.rank() != 2 || pred.entropy.size() != y.dim(0))
        throw ShapeError("entropy_error_records: prediction and target shapes differ");
    const std::size_t N = y.dim(0), J = y.dim(1);
    std::vector<EntropyErrorRecord> out;
    for (std::size_t s = 0, b = 0; s < N; s += batch_size, ++b) {
        const std::size_t e = std::min(N, s + batch_size);
        double h = 0, l1 = 0;
        for (std::size_t n = s; n < e; ++n) {
            h += pred.entropy[n];
            for (std::size_t j = 0; j < J; ++j) l1 += std::abs(pred.yhat[n * J + j] - y[n * J + j]);
        }
        out.push_back({b, h / static_cast<double>(e - s), l1 / static_cast<double>((e - s) * J)});
    }
    return out;
}

EntropyErrorResult entropy_error_analysis(const std::vector<EntropyErrorRecord> &records) {
    if (records.size() < 3)
        throw UndefinedMetricError("entropy_error_analysis: need at least 3 batches, got " +
                                   std::to_string(records.size()));
    std::vector<double> h, e;
    for (const auto &r : records) {
        h.push_back(r.mean_entropy);
        e.push_back(r.mean_l1_error);
    }
    return {eval::pearson_r(h, e), records};
}

void write_entropy_csv(const EntropyErrorResult &r, const std::string &path) {
    auto os = open_out(path);
    os << "batch_id,mean_entropy,mean_l1_error\n" << std::setprecision(9);
    for (const auto &x : r.table) os << x.batch_id << ',' << x.mean_entropy << ',' << x.mean_l1_error << '\n';
    os << "pcc,," << r.pcc << '\n';
}

template <class T>
ExportStats export_embeddings(const nets::EEGEncoder<T> &encoder, const std::vector<data::SessionPtr> &sessions,
                              const std::string &path, std::size_t stride, std::size_t batch_size) {
    if (batch_size == 0) throw ConfigError("export_embeddings: batch_size must be >= 1");
    auto enc = encoder;
    freeze<T>(enc);
    const std::size_t d = enc.latent();
    auto os = open_out(path);
    for (std::size_t i = 0; i < d; ++i) os << 'z' << i << ',';
    os << "phase,subject_id,session_id,t_end\n" << std::setprecision(9);
    ExportStats st;
    for (std::size_t si = 0; si < sessions.size(); ++si) {
        const auto &s = sessions[si];
        const auto ws = data::segment_windows(s, si, enc.window(), stride);
        std::vector<std::uint8_t> labels;
        try {
            labels = eval::assign_phases(eval::detect_session_events(*s), s->length());
        } catch (const NoEventsError &) {
        } catch (const InsufficientCyclesError &) {
        }
        std::vector<std::size_t> keep;
        std::vector<std::uint8_t> phase;
        for (std::size_t w = 0; w < ws.size(); ++w) {
            const std::uint8_t p = labels.empty() ? 0 : eval::window_phase(labels, ws[w].t_end);
            if (p == 0) {
                ++st.skipped;
                continue;
            }
            keep.push_back(w);
            phase.push_back(p);
        }
        for (std::size_t b = 0; b < keep.size(); b += batch_size) {
            const std::vector<std::size_t> idx(keep.begin() + b, keep.begin() + std::min(keep.size(), b + batch_size));
            Tape<T> tape(0, false);
            const auto z = enc.forward(tape, tape.constant(data::stack_eeg<T>(ws, idx))).value();
            for (std::size_t n = 0; n < idx.size(); ++n) {
                for (std::size_t i = 0; i < d; ++i) os << static_cast<double>(z[n * d + i]) << ',';
                os << int(phase[b + n]) << ',' << s->subject_id << ',' << s->session_id << ',' << ws[idx[n]].t_end
                   << '\n';
                ++st.rows;
            }
        }
    }
    if (!os) throw InputError("export_embeddings: write failed for " + path);
    return st;
}

#define NDG_INSTANTIATE(T)                                                                                        \
    template SaliencyMap saliency_map<T>(const Tensor<T> &, const SaliencyTarget<T> &);                           \
    template SaliencyMap saliency_map<T>(const nets::EEGEncoder<T> &, const nets::SessionHeads<T> &,              \
                                         const nets::DomainScorer<T> &, const Tensor<T> &, bool);                 \
    template ExportStats export_embeddings<T>(const nets::EEGEncoder<T> &, const std::vector<data::SessionPtr> &, \
                                              const std::string &, std::size_t, std::size_t);

NDG_INSTANTIATE(float)
NDG_INSTANTIATE(double)

} // namespace ndg::analysis
