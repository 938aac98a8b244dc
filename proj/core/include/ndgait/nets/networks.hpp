// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "ndgait/nets/module.hpp"

namespace ndg::nets {

/// f_e: [N×C×T] EEG windows -> [N×d] embeddings.
template <class T> class EEGEncoder {
public:
    EEGEncoder() = default;
    EEGEncoder(const NetConfig &cfg, Rng &rng);

    Var<T> forward(Tape<T> &tape, Var<T> x);
    /// Caps the L2 norm of every output filter of every convolution.
    void apply_max_norm(double cap);
    void visit(const ParamVisitor<T> &f);
    void visit(const ConstParamVisitor<T> &f) const;

    std::size_t channels() const { return channels_; }
    std::size_t latent() const { return latent_; }
    std::size_t window() const { return window_; }

    std::vector<Parameter<T>> conv_w, conv_b; // per block
    Parameter<T> proj_w, proj_b;              // full-length projection

private:
    std::size_t channels_ = 0, latent_ = 0, window_ = 0, pool_ = 2;
};

/// f_m: [N×J×T] joint sequences -> [N×d] embeddings.
template <class T> class MotorEncoder {
public:
    MotorEncoder() = default;
    MotorEncoder(const NetConfig &cfg, Rng &rng);

    Var<T> forward(Tape<T> &tape, Var<T> y);
    void visit(const ParamVisitor<T> &f);
    void visit(const ConstParamVisitor<T> &f) const;

    struct Layer {
        Parameter<T> wq, bq, wk, bk, wv, bv, wo, bo;
        Parameter<T> ln1_g, ln1_b, ff1_w, ff1_b, ff2_w, ff2_b, ln2_g, ln2_b;
    };
    Parameter<T> conv1_w, conv1_b, conv2_w, conv2_b;
    std::vector<Layer> layers;

private:
    std::size_t joints_ = 0, latent_ = 0, window_ = 0, heads_ = 1, kernel_ = 5, tokens_ = 0;
    Tensor<T> pos_;
};

/// g: [N×d] latents -> [N×J×T] joint sequences.
template <class T> class MotorDecoder {
public:
    MotorDecoder() = default;
    MotorDecoder(const NetConfig &cfg, Rng &rng);

    Var<T> forward(Tape<T> &tape, Var<T> z, NormMode mode);
    void visit(const ParamVisitor<T> &f);
    void visit(const ConstParamVisitor<T> &f) const;

    Parameter<T> fc_w, fc_b;
    // batchnorm after the projection and after every hidden tconv
    std::vector<Parameter<T>> bn_g, bn_b, bn_mean, bn_var;
    std::vector<Parameter<T>> tconv_w, tconv_b;

private:
    std::size_t joints_ = 0, latent_ = 0, window_ = 0, ch_ = 32, len_ = 25;
};

/// h_s for every source session, stored stacked: W [N_src·J × d].
template <class T> class SessionHeads {
public:
    SessionHeads() = default;
    SessionHeads(std::size_t n_src, std::size_t latent, std::size_t joints, Rng &rng);

    /// [N×d] -> [N×N_src×J].
    Var<T> forward(Tape<T> &tape, Var<T> z);
    void visit(const ParamVisitor<T> &f);
    void visit(const ConstParamVisitor<T> &f) const;

    std::size_t count() const { return n_src_; }
    std::size_t joints() const { return joints_; }

    Parameter<T> w, b;

private:
    std::size_t n_src_ = 0, latent_ = 0, joints_ = 0;
};

/// Domain weighting logits W_a z + b_a.
template <class T> class DomainScorer {
public:
    DomainScorer() = default;
    DomainScorer(std::size_t n_src, std::size_t latent, Rng &rng);

    /// [N×d] -> [N×N_src] logits.
    Var<T> forward(Tape<T> &tape, Var<T> z);
    void visit(const ParamVisitor<T> &f);
    void visit(const ConstParamVisitor<T> &f) const;

    std::size_t count() const { return w.value.rank() == 2 ? w.value.dim(0) : 0; }

    Parameter<T> w, b;
};

} // namespace ndg::nets
