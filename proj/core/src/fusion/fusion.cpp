// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/fusion/fusion.hpp"

#include <cmath>
#include <limits>

#include "ndgait/error.hpp"

namespace ndg::fusion {

template <class T> Var<T> head_predict(Tape<T> &tape, Var<T> z, std::size_t s, nets::SessionHeads<T> &heads) {
    if (s >= heads.count())
        throw InputError("head_predict: session " + std::to_string(s) + " out of range [0, " +
                         std::to_string(heads.count()) + ")");
    const std::size_t N = z.dim(0);
    return own_head_predict(heads.forward(tape, z), std::vector<std::size_t>(N, s));
}

template <class T> Var<T> own_head_predict(Var<T> all_heads, const std::vector<std::size_t> &sessions) {
    if (all_heads.rank() != 3) throw ShapeError("own_head_predict: expects [N×K×J]");
    const std::size_t N = all_heads.dim(0), K = all_heads.dim(1), J = all_heads.dim(2);
    if (sessions.size() != N) throw ShapeError("own_head_predict: one session index per sample required");
    std::vector<std::size_t> rows(N);
    for (std::size_t n = 0; n < N; ++n) {
        if (sessions[n] >= K) throw InputError("own_head_predict: session index out of range");
        rows[n] = n * K + sessions[n];
    }
    return diff::gather_rows(diff::reshape(all_heads, {N * K, J}), std::move(rows));
}

template <class T> Var<T> domain_weights(Var<T> logits, const std::vector<std::size_t> &active) {
    if (logits.rank() != 2) throw ShapeError("domain_weights: logits must be [N×K]");
    const std::size_t N = logits.dim(0), K = logits.dim(1);
    if (active.empty()) return diff::softmax_last(logits);
    if (active.size() != N) throw ShapeError("domain_weights: one mask entry per sample required");
    std::vector<std::uint8_t> mask(N * K, 0);
    for (std::size_t n = 0; n < N; ++n) {
        if (active[n] == kNoSession) continue;
        if (active[n] >= K) throw InputError("domain_weights: session index out of range");
        mask[n * K + active[n]] = 1;
    }
    return diff::masked_softmax_last(logits, mask);
}

template <class T> Var<T> mixture_predict(Var<T> all_heads, Var<T> alpha) {
    if (all_heads.rank() != 3 || alpha.rank() != 2 || alpha.dim(0) != all_heads.dim(0) ||
        alpha.dim(1) != all_heads.dim(1))
        throw ShapeError("mixture_predict: heads " + diff::shape_str(all_heads.shape()) + " vs alpha " +
                         diff::shape_str(alpha.shape()));
    const std::size_t N = alpha.dim(0), K = alpha.dim(1), J = all_heads.dim(2);
    return diff::reshape(diff::bmm(diff::reshape(alpha, {N, 1, K}), all_heads), {N, J});
}

template <class T> Var<T> loss_supervised(Var<T> yhat, Var<T> y) {
    if (yhat.shape() != y.shape() || y.rank() != 2)
        throw ShapeError("loss_supervised: " + diff::shape_str(yhat.shape()) + " vs " + diff::shape_str(y.shape()));
    return diff::scale(diff::sum(diff::square(diff::sub(yhat, y))), T(1) / static_cast<T>(y.dim(0)));
}

template <class T>
Stage2Loss<T> stage2_total(Tape<T> &tape, Var<T> z, const std::vector<std::size_t> &sessions, Var<T> y,
                           nets::SessionHeads<T> &heads, nets::DomainScorer<T> &scorer, const Stage2Terms &terms) {
    auto H = heads.forward(tape, z);
    auto sup = loss_supervised(own_head_predict(H, sessions), y);
    Stage2Loss<T> out{diff::scale(sup, static_cast<T>(terms.w_sup)), static_cast<double>(sup.item()),
                      std::numeric_limits<double>::quiet_NaN()};
    if (terms.fusion) {
        auto alpha = domain_weights(scorer.forward(tape, z), sessions);
        auto df = loss_domain_fusion(mixture_predict(H, alpha), y);
        out.df = static_cast<double>(df.item());
        out.total = diff::add(out.total, diff::scale(df, static_cast<T>(terms.w_df)));
    }
    return out;
}

double attention_entropy(const double *alpha, std::size_t K) {
    double s = 0, h = 0;
    for (std::size_t k = 0; k < K; ++k) {
        if (!(alpha[k] >= 0)) throw ContractError("attention_entropy: negative or non-finite weight");
        s += alpha[k];
        if (alpha[k] > 0) h -= alpha[k] * std::log(alpha[k]);
    }
    if (std::abs(s - 1.0) > 1e-6) throw ContractError("attention_entropy: weights sum to " + std::to_string(s));
    return h;
}

template <class T>
MixturePrediction inference_predict(const Tensor<T> &z, nets::SessionHeads<T> &heads, nets::DomainScorer<T> &scorer,
                                    bool uniform) {
    Tape<T> tape(0, false);
    auto zv = tape.constant(z);
    auto H = heads.forward(tape, zv);
    const std::size_t N = z.dim(0), K = heads.count();
    Var<T> alpha = uniform ? tape.constant(Tensor<T>({N, K}, T(1) / static_cast<T>(K)))
                           : domain_weights(scorer.forward(tape, zv), {});
    auto y = mixture_predict(H, alpha);
    MixturePrediction out;
    out.yhat = y.value().template cast<double>();
    out.alpha = alpha.value().template cast<double>();
    out.entropy.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
        // renormalize in double so float rounding cannot trip the contract
        std::vector<double> a(out.alpha.ptr() + n * K, out.alpha.ptr() + (n + 1) * K);
        double s = 0;
        for (double v : a) s += v;
        for (double &v : a) v /= s;
        out.entropy[n] = attention_entropy(a);
    }
    return out;
}

#define NDG_INSTANTIATE(T)                                                                                      \
    template Var<T> head_predict<T>(Tape<T> &, Var<T>, std::size_t, nets::SessionHeads<T> &);                   \
    template Var<T> own_head_predict<T>(Var<T>, const std::vector<std::size_t> &);                              \
    template Var<T> domain_weights<T>(Var<T>, const std::vector<std::size_t> &);                                \
    template Var<T> mixture_predict<T>(Var<T>, Var<T>);                                                         \
    template Var<T> loss_supervised<T>(Var<T>, Var<T>);                                                         \
    template Stage2Loss<T> stage2_total<T>(Tape<T> &, Var<T>, const std::vector<std::size_t> &, Var<T>,         \
                                           nets::SessionHeads<T> &, nets::DomainScorer<T> &, const Stage2Terms &); \
    template MixturePrediction inference_predict<T>(const Tensor<T> &, nets::SessionHeads<T> &,                 \
                                                    nets::DomainScorer<T> &, bool);

NDG_INSTANTIATE(float)
NDG_INSTANTIATE(double)

} // namespace ndg::fusion
