// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ndgait/nets/networks.hpp"
#include "ndgait/objectives/losses.hpp"

namespace ndg::objectives {

/// Loss switches and weights for Stage I.
struct Stage1Terms {
    bool rec = true, pred = true, rcl = true;
    double w_rec = 1.0, w_pred = 1.0, w_rcl = 1.0;
};

/// f_e, f_m, g and the distance parameters.
template <class T> struct Stage1Model {
    Stage1Model() = default;
    Stage1Model(const nets::NetConfig &cfg, std::size_t token_count, DistanceVariant variant, Rng &rng);

    void visit(const nets::ParamVisitor<T> &f);
    void visit(const nets::ConstParamVisitor<T> &f) const;

    nets::NetConfig cfg;
    nets::EEGEncoder<T> eeg;
    nets::MotorEncoder<T> motor;
    nets::MotorDecoder<T> decoder;
    DistanceParams<T> dist;
};

template <class T> struct Stage1Loss {
    Var<T> total;
    // component values; NaN when the term is switched off
    double rec, pred, rcl;
};

/// L_rec + L_pred + L_rcl on a batch of EEG [N×C×T] and motion [N×J×T],
/// where the reconstruction is decoded from the EEG embedding.
template <class T>
Stage1Loss<T> stage1_total(Tape<T> &tape, Stage1Model<T> &m, const Tensor<T> &eeg, const Tensor<T> &motion,
                           const Stage1Terms &terms = {}, nets::NormMode mode = nets::NormMode::Train);

} // namespace ndg::objectives
