// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/objectives/stage1.hpp"

#include <limits>

#include "ndgait/error.hpp"

namespace ndg::objectives {

template <class T>
Stage1Model<T>::Stage1Model(const nets::NetConfig &c, std::size_t token_count, DistanceVariant variant, Rng &rng)
    : cfg(c), eeg(c, rng), motor(c, rng), decoder(c, rng), dist(c.latent, token_count, variant, rng) {}

template <class T> void Stage1Model<T>::visit(const nets::ParamVisitor<T> &f) {
    eeg.visit(f);
    motor.visit(f);
    decoder.visit(f);
    dist.visit(f);
}

template <class T> void Stage1Model<T>::visit(const nets::ConstParamVisitor<T> &f) const {
    eeg.visit(f);
    motor.visit(f);
    decoder.visit(f);
    dist.visit(f);
}

template <class T>
Stage1Loss<T> stage1_total(Tape<T> &tape, Stage1Model<T> &m, const Tensor<T> &eeg, const Tensor<T> &motion,
                           const Stage1Terms &terms, nets::NormMode mode) {
    if (!terms.rec && !terms.pred && !terms.rcl) throw ConfigError("stage1_total: every loss term is disabled");
    if (eeg.rank() != 3 || motion.rank() != 3 || eeg.dim(0) != motion.dim(0))
        throw ShapeError("stage1_total: eeg " + diff::shape_str(eeg.shape) + " vs motion " +
                         diff::shape_str(motion.shape));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Stage1Loss<T> out{Var<T>{}, nan, nan, nan};

    auto x = tape.constant(eeg);
    auto y = tape.constant(motion);
    auto z_e = m.eeg.forward(tape, x);

    std::vector<Var<T>> parts;
    if (terms.rec || terms.pred) {
        auto yhat = m.decoder.forward(tape, z_e, mode);
        if (terms.rec) {
            auto l = loss_reconstruction(yhat, y);
            out.rec = static_cast<double>(l.item());
            parts.push_back(diff::scale(l, static_cast<T>(terms.w_rec)));
        }
        if (terms.pred) {
            auto l = loss_prediction(yhat, y);
            out.pred = static_cast<double>(l.item());
            parts.push_back(diff::scale(l, static_cast<T>(terms.w_pred)));
        }
    }
    if (terms.rcl) {
        auto z_m = m.motor.forward(tape, y);
        auto l = relative_contrastive_loss(z_e, z_m, m.dist, build_motion_ranking(motion));
        out.rcl = static_cast<double>(l.item());
        parts.push_back(diff::scale(l, static_cast<T>(terms.w_rcl)));
    }
    out.total = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) out.total = diff::add(out.total, parts[i]);
    return out;
}

template struct Stage1Model<float>;
template struct Stage1Model<double>;
template Stage1Loss<float> stage1_total<float>(Tape<float> &, Stage1Model<float> &, const Tensor<float> &,
                                               const Tensor<float> &, const Stage1Terms &, nets::NormMode);
template Stage1Loss<double> stage1_total<double>(Tape<double> &, Stage1Model<double> &, const Tensor<double> &,
                                                 const Tensor<double> &, const Stage1Terms &, nets::NormMode);

} // namespace ndg::objectives
