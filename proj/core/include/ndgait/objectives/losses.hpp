// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "ndgait/nets/module.hpp"

namespace ndg::objectives {

using diff::Parameter;
using diff::Tape;
using diff::Tensor;
using diff::Var;

enum class DistanceVariant { CrossAttention, Cosine };

DistanceVariant parse_distance_variant(const std::string &s);
std::string to_string(DistanceVariant v);

inline constexpr double kTauMin = 1e-3;

/// Learned cross-modal distance and score calibration (tau, b).
template <class T> class DistanceParams {
public:
    DistanceParams() = default;
    /// token_count = 1 is the single-token reading where the attention
    /// weight is identically 1.
    DistanceParams(std::size_t latent, std::size_t token_count, DistanceVariant variant, Rng &rng);

    void visit(const nets::ParamVisitor<T> &f);
    void visit(const nets::ConstParamVisitor<T> &f) const;

    std::size_t latent() const { return latent_; }
    std::size_t token_count() const { return tokens_; }
    DistanceVariant variant() const { return variant_; }

    Parameter<T> wq, wk, wv, wo, tau, bias;

private:
    std::size_t latent_ = 0, tokens_ = 8;
    DistanceVariant variant_ = DistanceVariant::CrossAttention;
};

/// (1/N) sum_i ||yhat_i - y_i||^2 over all J×T entries.
template <class T> Var<T> loss_reconstruction(Var<T> yhat, Var<T> y);

/// (1/N) sum_i ||yhat_i[:, T-1] - y_i[:, T-1]||^2.
template <class T> Var<T> loss_prediction(Var<T> yhat, Var<T> y);

/// Single pair distance; z_e and z_m are [d].
template <class T> Var<T> cross_attention_distance(Var<T> z_e, Var<T> z_m, DistanceParams<T> &p);

/// D[i][j] = d(z_e^i, z_m^j) for Z_e, Z_m of shape [N×d]; returns [N×N].
template <class T> Var<T> pairwise_distances(Var<T> Z_e, Var<T> Z_m, DistanceParams<T> &p);

/// S = -D / max(tau, tau_min) + b.
template <class T> Var<T> similarity_scores(Var<T> D, DistanceParams<T> &p);

/// order[i] lists candidate indices for anchor i from most to least similar.
struct RankingSpec {
    std::vector<std::vector<std::size_t>> order;
    std::size_t size() const { return order.size(); }
    /// Throws ContractError unless every row is a permutation of 0..N-1.
    void validate() const;
};

/// Sorts candidates by squared motion distance over the full window, ties by
/// index. Y is [N×J×T].
template <class T> RankingSpec build_motion_ranking(const Tensor<T> &Y);

/// Listwise ranking loss on a score matrix S [N×N]: mean over anchors of
/// -sum_{k<N-1} (S_{i,r_k} - logsumexp_{m>=k} S_{i,r_m}).
template <class T> Var<T> relative_contrastive_loss(Var<T> S, const RankingSpec &rank);

/// Convenience: scores from embeddings then the ranking loss.
template <class T>
Var<T> relative_contrastive_loss(Var<T> Z_e, Var<T> Z_m, DistanceParams<T> &p, const RankingSpec &rank);

} // namespace ndg::objectives
