// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/objectives/losses.hpp"

#include <algorithm>
#include <numeric>

#include "ndgait/error.hpp"

namespace ndg::objectives {

DistanceVariant parse_distance_variant(const std::string &s) {
    if (s == "cross_attention") return DistanceVariant::CrossAttention;
    if (s == "cosine") return DistanceVariant::Cosine;
    throw ConfigError("unknown distance variant '" + s + "' (expected cross_attention or cosine)");
}

std::string to_string(DistanceVariant v) { return v == DistanceVariant::Cosine ? "cosine" : "cross_attention"; }

template <class T>
DistanceParams<T>::DistanceParams(std::size_t latent, std::size_t token_count, DistanceVariant variant, Rng &rng)
    : latent_(latent), tokens_(token_count), variant_(variant) {
    if (token_count < 1 || latent % token_count != 0)
        throw ConfigError("distance: latent " + std::to_string(latent) + " not divisible by token_count " +
                          std::to_string(token_count));
    for (auto [p, n] : {std::pair{&wq, "dist.wq"}, {&wk, "dist.wk"}, {&wv, "dist.wv"}, {&wo, "dist.wo"}}) {
        *p = nets::make_param<T>(n, {latent, latent});
        nets::glorot(*p, latent, latent, rng);
    }
    tau = nets::make_param<T>("dist.tau", {1}, T(1));
    bias = nets::make_param<T>("dist.b", {1}, T(0));
}

template <class T> void DistanceParams<T>::visit(const nets::ParamVisitor<T> &f) {
    for (auto *p : {&wq, &wk, &wv, &wo, &tau, &bias}) f(*p, false);
}

template <class T> void DistanceParams<T>::visit(const nets::ConstParamVisitor<T> &f) const {
    for (auto *p : {&wq, &wk, &wv, &wo, &tau, &bias}) f(*p, false);
}

namespace {

template <class T> void require_same_shape(const Var<T> &a, const Var<T> &b, const char *op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": " + diff::shape_str(a.shape()) + " vs " + diff::shape_str(b.shape()));
}

} // namespace

template <class T> Var<T> loss_reconstruction(Var<T> yhat, Var<T> y) {
    require_same_shape(yhat, y, "loss_reconstruction");
    if (y.rank() != 3) throw ShapeError("loss_reconstruction: expects [N×J×T]");
    return diff::scale(diff::sum(diff::square(diff::sub(yhat, y))), T(1) / static_cast<T>(y.dim(0)));
}

template <class T> Var<T> loss_prediction(Var<T> yhat, Var<T> y) {
    require_same_shape(yhat, y, "loss_prediction");
    if (y.rank() != 3) throw ShapeError("loss_prediction: expects [N×J×T]");
    const std::size_t last = y.dim(2) - 1;
    auto d = diff::sub(diff::select_last(yhat, last), diff::select_last(y, last));
    return diff::scale(diff::sum(diff::square(d)), T(1) / static_cast<T>(y.dim(0)));
}

template <class T> Var<T> pairwise_distances(Var<T> Z_e, Var<T> Z_m, DistanceParams<T> &p) {
    require_same_shape(Z_e, Z_m, "pairwise_distances");
    if (Z_e.rank() != 2 || Z_e.dim(1) != p.latent())
        throw ShapeError("pairwise_distances: expected [N×" + std::to_string(p.latent()) + "], got " +
                         diff::shape_str(Z_e.shape()));
    auto &tape = *Z_e.tape;
    const std::size_t N = Z_e.dim(0), d = p.latent();

    if (p.variant() == DistanceVariant::Cosine) {
        auto cs = diff::matmul(diff::l2_normalize_last(Z_e), diff::transpose2d(diff::l2_normalize_last(Z_m)));
        return diff::add_const(diff::scale(cs, T(-1)), T(1));
    }

    const std::size_t tc = p.token_count(), dt = d / tc;
    auto Q = diff::linear(Z_e, tape.param(p.wq));
    auto K = diff::linear(Z_m, tape.param(p.wk));
    auto V = diff::linear(Z_m, tape.param(p.wv));
    std::vector<std::size_t> ii(N * N), jj(N * N);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            ii[i * N + j] = i;
            jj[i * N + j] = j;
        }
    auto Qp = diff::reshape(diff::gather_rows(Q, ii), {N * N, tc, dt});
    auto Kp = diff::reshape(diff::gather_rows(K, jj), {N * N, tc, dt});
    auto Vp = diff::reshape(diff::gather_rows(V, jj), {N * N, tc, dt});
    auto A = diff::reshape(diff::scaled_dot_attention(Qp, Kp, Vp), {N * N, d});
    auto Zhat = diff::linear(A, tape.param(p.wo));
    auto diffv = diff::sub(Zhat, diff::gather_rows(Z_m, jj));
    return diff::reshape(diff::sum_last(diff::square(diffv)), {N, N});
}

template <class T> Var<T> cross_attention_distance(Var<T> z_e, Var<T> z_m, DistanceParams<T> &p) {
    require_same_shape(z_e, z_m, "cross_attention_distance");
    if (z_e.rank() != 1) throw ShapeError("cross_attention_distance: expects [d] vectors");
    const std::size_t d = z_e.dim(0);
    auto D = pairwise_distances(diff::reshape(z_e, {1, d}), diff::reshape(z_m, {1, d}), p);
    return diff::reshape(D, {});
}

template <class T> Var<T> similarity_scores(Var<T> D, DistanceParams<T> &p) {
    auto &tape = *D.tape;
    auto tau = diff::clamp_min(tape.param(p.tau), static_cast<T>(kTauMin));
    auto S = diff::mul_scalar(diff::scale(D, T(-1)), diff::reciprocal(tau));
    return diff::add_scalar(S, tape.param(p.bias));
}

void RankingSpec::validate() const {
    const std::size_t N = order.size();
    for (std::size_t i = 0; i < N; ++i) {
        if (order[i].size() != N) throw ContractError("ranking row " + std::to_string(i) + " has wrong length");
        std::vector<bool> seen(N, false);
        for (std::size_t j : order[i]) {
            if (j >= N || seen[j]) throw ContractError("ranking row " + std::to_string(i) + " is not a permutation");
            seen[j] = true;
        }
    }
}

template <class T> RankingSpec build_motion_ranking(const Tensor<T> &Y) {
    if (Y.rank() < 1) throw ShapeError("build_motion_ranking: expects [N×...]");
    const std::size_t N = Y.dim(0), inner = N ? Y.size() / N : 0;
    std::vector<double> dist(N * N, 0.0);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) {
            double s = 0;
            const T *a = Y.ptr() + i * inner, *b = Y.ptr() + j * inner;
            for (std::size_t k = 0; k < inner; ++k) {
                const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                s += d * d;
            }
            dist[i * N + j] = dist[j * N + i] = s;
        }
    RankingSpec r;
    r.order.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        auto &o = r.order[i];
        o.resize(N);
        std::iota(o.begin(), o.end(), 0);
        // the anchor itself leads even when another sample is an exact duplicate
        std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
            const double da = a == i ? -1.0 : dist[i * N + a], db = b == i ? -1.0 : dist[i * N + b];
            return da < db;
        });
    }
    return r;
}

template <class T> Var<T> relative_contrastive_loss(Var<T> S, const RankingSpec &rank) {
    if (S.rank() != 2 || S.dim(0) != S.dim(1)) throw ShapeError("relative_contrastive_loss: scores must be [N×N]");
    const std::size_t N = S.dim(0);
    if (rank.size() != N) throw ContractError("relative_contrastive_loss: ranking size differs from batch");
    rank.validate();
    if (N == 0) throw DegenerateBatchError("relative_contrastive_loss: empty batch");
    if (N == 1) return diff::scale(diff::sum(S), T(0));
    std::vector<std::size_t> idx(N * N);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k < N; ++k) idx[i * N + k] = i * N + rank.order[i][k];
    auto R = diff::take(S, idx, {N, N});
    auto terms = diff::sub(R, diff::suffix_logsumexp_last(R)); // [N×N], last column is 0
    std::vector<std::size_t> head;
    head.reserve(N * (N - 1));
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k + 1 < N; ++k) head.push_back(i * N + k);
    auto kept = diff::take(terms, std::move(head), {N, N - 1});
    return diff::scale(diff::sum(kept), T(-1) / static_cast<T>(N));
}

template <class T>
Var<T> relative_contrastive_loss(Var<T> Z_e, Var<T> Z_m, DistanceParams<T> &p, const RankingSpec &rank) {
    return relative_contrastive_loss(similarity_scores(pairwise_distances(Z_e, Z_m, p), p), rank);
}

#define NDG_INSTANTIATE(T)                                                                                   \
    template class DistanceParams<T>;                                                                        \
    template Var<T> loss_reconstruction<T>(Var<T>, Var<T>);                                                  \
    template Var<T> loss_prediction<T>(Var<T>, Var<T>);                                                      \
    template Var<T> cross_attention_distance<T>(Var<T>, Var<T>, DistanceParams<T> &);                        \
    template Var<T> pairwise_distances<T>(Var<T>, Var<T>, DistanceParams<T> &);                              \
    template Var<T> similarity_scores<T>(Var<T>, DistanceParams<T> &);                                       \
    template RankingSpec build_motion_ranking<T>(const Tensor<T> &);                                         \
    template Var<T> relative_contrastive_loss<T>(Var<T>, const RankingSpec &);                               \
    template Var<T> relative_contrastive_loss<T>(Var<T>, Var<T>, DistanceParams<T> &, const RankingSpec &);

NDG_INSTANTIATE(float)
NDG_INSTANTIATE(double)

} // namespace ndg::objectives
