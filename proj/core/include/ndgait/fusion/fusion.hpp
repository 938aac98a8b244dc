// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "ndgait/nets/networks.hpp"

namespace ndg::fusion {

using diff::Tape;
using diff::Tensor;
using diff::Var;

/// Per-sample session masks. active[n] is the session whose weight is forced
/// to zero for sample n, or kNoSession in inference mode.
inline constexpr std::size_t kNoSession = static_cast<std::size_t>(-1);

/// Affine output of head s for embeddings z [N×d] -> [N×J].
template <class T> Var<T> head_predict(Tape<T> &tape, Var<T> z, std::size_t s, nets::SessionHeads<T> &heads);

/// Each sample's own head: out[n] = h_{sessions[n]}(z_n). all_heads is [N×K×J].
template <class T> Var<T> own_head_predict(Var<T> all_heads, const std::vector<std::size_t> &sessions);

/// Masked softmax of the scorer logits [N×K]. Throws DegenerateMaskError when
/// a row is fully masked (K = 1 in training mode).
template <class T> Var<T> domain_weights(Var<T> logits, const std::vector<std::size_t> &active);

/// sum_k alpha[n,k] * heads[n,k,:] -> [N×J].
template <class T> Var<T> mixture_predict(Var<T> all_heads, Var<T> alpha);

/// (1/N) sum_n ||yhat_n - y_n||^2 over J entries.
template <class T> Var<T> loss_supervised(Var<T> yhat, Var<T> y);
template <class T> Var<T> loss_domain_fusion(Var<T> yhat_mix, Var<T> y) { return loss_supervised(yhat_mix, y); }

struct Stage2Terms {
    bool fusion = true; // false: heads only, uniform mixture at inference
    double w_sup = 1.0, w_df = 1.0;
};

template <class T> struct Stage2Loss {
    Var<T> total;
    double sup, df; // df is NaN without fusion
};

/// L_sup + L_df for embeddings z [N×d] (frozen or live), sample sessions,
/// and final-frame targets y [N×J].
template <class T>
Stage2Loss<T> stage2_total(Tape<T> &tape, Var<T> z, const std::vector<std::size_t> &sessions, Var<T> y,
                           nets::SessionHeads<T> &heads, nets::DomainScorer<T> &scorer, const Stage2Terms &terms = {});

struct MixturePrediction {
    Tensor<double> yhat;    // [N×J]
    Tensor<double> alpha;   // [N×K]
    std::vector<double> entropy; // nats, per sample
};

/// Unmasked mixture over every source head. With uniform = true the scorer
/// is bypassed and alpha = 1/K.
template <class T>
MixturePrediction inference_predict(const Tensor<T> &z, nets::SessionHeads<T> &heads, nets::DomainScorer<T> &scorer,
                                    bool uniform = false);

/// -sum a ln a with 0 ln 0 = 0. Throws ContractError if alpha is negative or
/// does not sum to 1 within 1e-6.
double attention_entropy(const double *alpha, std::size_t K);
inline double attention_entropy(const std::vector<double> &a) { return attention_entropy(a.data(), a.size()); }

} // namespace ndg::fusion
