// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/nets/networks.hpp"

#include "ndgait/error.hpp"

namespace ndg::nets {

namespace {

template <class T> void cap_filters(Parameter<T> &w, double cap) {
    const std::size_t Cout = w.value.dim(0);
    const std::size_t per = w.value.size() / Cout;
    for (std::size_t o = 0; o < Cout; ++o) {
        T *k = w.value.ptr() + o * per;
        double ss = 0;
        for (std::size_t i = 0; i < per; ++i) ss += static_cast<double>(k[i]) * static_cast<double>(k[i]);
        const double n = std::sqrt(ss);
        if (n > cap) {
            const double s = cap / n;
            for (std::size_t i = 0; i < per; ++i) k[i] = static_cast<T>(static_cast<double>(k[i]) * s);
        }
    }
}

std::string idx_name(const char *prefix, std::size_t i, const char *suffix) {
    return std::string(prefix) + std::to_string(i) + suffix;
}

} // namespace

// ---------------------------------------------------------------- EEG encoder

template <class T>
EEGEncoder<T>::EEGEncoder(const NetConfig &cfg, Rng &rng)
    : channels_(cfg.channels), latent_(cfg.latent), window_(cfg.window), pool_(cfg.eeg_pool) {
    cfg.validate();
    const auto filters = cfg.eeg_filters();
    std::size_t cin = cfg.channels;
    for (std::size_t i = 0; i < filters.size(); ++i) {
        const std::size_t k = cfg.eeg_kernels[i], cout = filters[i];
        conv_w.push_back(make_param<T>(idx_name("eeg.block", i, ".w"), {cout, cin, k}));
        conv_b.push_back(make_param<T>(idx_name("eeg.block", i, ".b"), {cout}));
        glorot(conv_w.back(), cin * k, cout * k, rng);
        cin = cout;
    }
    const std::size_t L = cfg.eeg_final_length();
    proj_w = make_param<T>("eeg.proj.w", {cfg.latent, cin, L});
    proj_b = make_param<T>("eeg.proj.b", {cfg.latent});
    glorot(proj_w, cin * L, cfg.latent * L, rng);
}

template <class T> Var<T> EEGEncoder<T>::forward(Tape<T> &tape, Var<T> x) {
    if (x.rank() != 3 || x.dim(1) != channels_ || x.dim(2) != window_)
        throw ShapeError("eeg_encode: expected [N×" + std::to_string(channels_) + "×" + std::to_string(window_) +
                         "], got " + diff::shape_str(x.shape()));
    for (std::size_t i = 0; i < conv_w.size(); ++i) {
        auto b = tape.param(conv_b[i]);
        x = diff::conv1d(x, tape.param(conv_w[i]), &b);
        x = diff::elu(x);
        x = diff::maxpool1d(x, pool_);
    }
    auto pb = tape.param(proj_b);
    x = diff::conv1d(x, tape.param(proj_w), &pb);
    return diff::reshape(x, {x.dim(0), latent_});
}

template <class T> void EEGEncoder<T>::apply_max_norm(double cap) {
    if (!(cap > 0)) throw ConfigError("apply_max_norm: cap must be positive");
    for (auto &w : conv_w) cap_filters(w, cap);
    cap_filters(proj_w, cap);
}

template <class T> void EEGEncoder<T>::visit(const ParamVisitor<T> &f) {
    for (std::size_t i = 0; i < conv_w.size(); ++i) {
        f(conv_w[i], false);
        f(conv_b[i], false);
    }
    f(proj_w, false);
    f(proj_b, false);
}

template <class T> void EEGEncoder<T>::visit(const ConstParamVisitor<T> &f) const {
    const_cast<EEGEncoder *>(this)->visit([&f](Parameter<T> &p, bool buf) { f(p, buf); });
}

// -------------------------------------------------------------- motor encoder

template <class T>
MotorEncoder<T>::MotorEncoder(const NetConfig &cfg, Rng &rng)
    : joints_(cfg.joints), latent_(cfg.latent), window_(cfg.window), heads_(cfg.motor_heads),
      kernel_(cfg.motor_conv_kernel), tokens_(cfg.motor_tokens()) {
    cfg.validate();
    const std::size_t d = cfg.latent, h = d / 2, k = kernel_, ff = cfg.motor_ff_mult * d;
    conv1_w = make_param<T>("motor.conv1.w", {h, joints_, k});
    conv1_b = make_param<T>("motor.conv1.b", {h});
    glorot(conv1_w, joints_ * k, h * k, rng);
    conv2_w = make_param<T>("motor.conv2.w", {d, h, k});
    conv2_b = make_param<T>("motor.conv2.b", {d});
    glorot(conv2_w, h * k, d * k, rng);
    for (std::size_t l = 0; l < cfg.motor_layers; ++l) {
        const std::string p = "motor.layer" + std::to_string(l) + ".";
        Layer L;
        auto lin = [&](Parameter<T> &w, Parameter<T> &b, const std::string &n, std::size_t out, std::size_t in) {
            w = make_param<T>(p + n + ".w", {out, in});
            b = make_param<T>(p + n + ".b", {out});
            glorot(w, in, out, rng);
        };
        lin(L.wq, L.bq, "q", d, d);
        lin(L.wk, L.bk, "k", d, d);
        lin(L.wv, L.bv, "v", d, d);
        lin(L.wo, L.bo, "o", d, d);
        L.ln1_g = make_param<T>(p + "ln1.g", {d}, T(1));
        L.ln1_b = make_param<T>(p + "ln1.b", {d});
        lin(L.ff1_w, L.ff1_b, "ff1", ff, d);
        lin(L.ff2_w, L.ff2_b, "ff2", d, ff);
        L.ln2_g = make_param<T>(p + "ln2.g", {d}, T(1));
        L.ln2_b = make_param<T>(p + "ln2.b", {d});
        layers.push_back(std::move(L));
    }
    pos_ = sinusoidal_positions<T>(tokens_, d);
}

template <class T> Var<T> MotorEncoder<T>::forward(Tape<T> &tape, Var<T> y) {
    if (y.rank() != 3 || y.dim(1) != joints_ || y.dim(2) != window_)
        throw ShapeError("motor_encode: expected [N×" + std::to_string(joints_) + "×" + std::to_string(window_) +
                         "], got " + diff::shape_str(y.shape()));
    const std::size_t N = y.dim(0), d = latent_, L = tokens_, H = heads_, dh = d / H, pad = kernel_ / 2;
    auto b1 = tape.param(conv1_b);
    auto x = diff::avgpool1d(diff::relu(diff::conv1d(y, tape.param(conv1_w), &b1, 2, pad)), 2);
    auto b2 = tape.param(conv2_b);
    x = diff::avgpool1d(diff::relu(diff::conv1d(x, tape.param(conv2_w), &b2, 2, pad)), 2);
    x = diff::permute(x, {0, 2, 1}); // [N×L×d]

    Tensor<T> pe({N, L, d});
    for (std::size_t n = 0; n < N; ++n) std::copy(pos_.data.begin(), pos_.data.end(), pe.data.begin() + n * L * d);
    x = diff::reshape(diff::add(x, tape.constant(std::move(pe))), {N * L, d});

    auto heads = [&](Var<T> v) {
        v = diff::reshape(v, {N, L, H, dh});
        return diff::reshape(diff::permute(v, {0, 2, 1, 3}), {N * H, L, dh});
    };
    for (auto &ly : layers) {
        auto bq = tape.param(ly.bq), bk = tape.param(ly.bk), bv = tape.param(ly.bv), bo = tape.param(ly.bo);
        auto q = heads(diff::linear(x, tape.param(ly.wq), &bq));
        auto k = heads(diff::linear(x, tape.param(ly.wk), &bk));
        auto v = heads(diff::linear(x, tape.param(ly.wv), &bv));
        auto a = diff::scaled_dot_attention(q, k, v); // [N·H×L×dh]
        a = diff::reshape(diff::permute(diff::reshape(a, {N, H, L, dh}), {0, 2, 1, 3}), {N * L, d});
        a = diff::linear(a, tape.param(ly.wo), &bo);
        x = diff::layernorm_last(diff::add(x, a), tape.param(ly.ln1_g), tape.param(ly.ln1_b));
        auto f1 = tape.param(ly.ff1_b), f2 = tape.param(ly.ff2_b);
        auto f = diff::linear(diff::relu(diff::linear(x, tape.param(ly.ff1_w), &f1)), tape.param(ly.ff2_w), &f2);
        x = diff::layernorm_last(diff::add(x, f), tape.param(ly.ln2_g), tape.param(ly.ln2_b));
    }
    return diff::mean_axis1(diff::reshape(x, {N, L, d}));
}

template <class T> void MotorEncoder<T>::visit(const ParamVisitor<T> &f) {
    f(conv1_w, false);
    f(conv1_b, false);
    f(conv2_w, false);
    f(conv2_b, false);
    for (auto &ly : layers)
        for (auto *p : {&ly.wq, &ly.bq, &ly.wk, &ly.bk, &ly.wv, &ly.bv, &ly.wo, &ly.bo, &ly.ln1_g, &ly.ln1_b,
                        &ly.ff1_w, &ly.ff1_b, &ly.ff2_w, &ly.ff2_b, &ly.ln2_g, &ly.ln2_b})
            f(*p, false);
}

template <class T> void MotorEncoder<T>::visit(const ConstParamVisitor<T> &f) const {
    const_cast<MotorEncoder *>(this)->visit([&f](Parameter<T> &p, bool buf) { f(p, buf); });
}

// -------------------------------------------------------------- motor decoder

template <class T>
MotorDecoder<T>::MotorDecoder(const NetConfig &cfg, Rng &rng)
    : joints_(cfg.joints), latent_(cfg.latent), window_(cfg.window), ch_(cfg.dec_channels), len_(cfg.dec_length) {
    cfg.validate();
    const std::size_t flat = ch_ * len_;
    fc_w = make_param<T>("dec.fc.w", {flat, latent_});
    fc_b = make_param<T>("dec.fc.b", {flat});
    glorot(fc_w, latent_, flat, rng);
    auto add_bn = [&](std::size_t i) {
        bn_g.push_back(make_param<T>(idx_name("dec.bn", i, ".g"), {ch_}, T(1)));
        bn_b.push_back(make_param<T>(idx_name("dec.bn", i, ".b"), {ch_}));
        bn_mean.push_back(make_param<T>(idx_name("dec.bn", i, ".running_mean"), {ch_}, T(0), false));
        bn_var.push_back(make_param<T>(idx_name("dec.bn", i, ".running_var"), {ch_}, T(1), false));
    };
    add_bn(0);
    for (std::size_t i = 0; i < cfg.dec_layers; ++i) {
        const bool last = i + 1 == cfg.dec_layers;
        const std::size_t cout = last ? joints_ : ch_;
        tconv_w.push_back(make_param<T>(idx_name("dec.tconv", i, ".w"), {ch_, cout, 4}));
        tconv_b.push_back(make_param<T>(idx_name("dec.tconv", i, ".b"), {cout}));
        glorot(tconv_w.back(), ch_ * 4, cout * 4, rng);
        if (!last) add_bn(i + 1);
    }
}

template <class T> Var<T> MotorDecoder<T>::forward(Tape<T> &tape, Var<T> z, NormMode mode) {
    if (z.rank() != 2 || z.dim(1) != latent_)
        throw ShapeError("motor_decode: expected [N×" + std::to_string(latent_) + "], got " +
                         diff::shape_str(z.shape()));
    const std::size_t N = z.dim(0);
    auto bn = [&](Var<T> x, std::size_t i) {
        diff::BatchNormStats<T> st{&bn_mean[i].value, &bn_var[i].value, T(0.1), tape.grad_enabled()};
        return diff::relu(diff::batchnorm1d(x, tape.param(bn_g[i]), tape.param(bn_b[i]), st, mode));
    };
    auto fb = tape.param(fc_b);
    auto x = diff::reshape(diff::linear(z, tape.param(fc_w), &fb), {N, ch_, len_});
    x = bn(x, 0);
    for (std::size_t i = 0; i < tconv_w.size(); ++i) {
        auto b = tape.param(tconv_b[i]);
        x = diff::conv1d_transpose(x, tape.param(tconv_w[i]), &b, 2);
        if (i + 1 < tconv_w.size()) x = bn(x, i + 1);
    }
    return diff::fit_length(x, window_);
}

template <class T> void MotorDecoder<T>::visit(const ParamVisitor<T> &f) {
    f(fc_w, false);
    f(fc_b, false);
    for (std::size_t i = 0; i < bn_g.size(); ++i) {
        f(bn_g[i], false);
        f(bn_b[i], false);
        f(bn_mean[i], true);
        f(bn_var[i], true);
    }
    for (std::size_t i = 0; i < tconv_w.size(); ++i) {
        f(tconv_w[i], false);
        f(tconv_b[i], false);
    }
}

template <class T> void MotorDecoder<T>::visit(const ConstParamVisitor<T> &f) const {
    const_cast<MotorDecoder *>(this)->visit([&f](Parameter<T> &p, bool buf) { f(p, buf); });
}

// ------------------------------------------------------------ heads / scorer

template <class T>
SessionHeads<T>::SessionHeads(std::size_t n_src, std::size_t latent, std::size_t joints, Rng &rng)
    : n_src_(n_src), latent_(latent), joints_(joints) {
    if (n_src < 1) throw ConfigError("SessionHeads: need at least one source session");
    w = make_param<T>("heads.w", {n_src * joints, latent});
    b = make_param<T>("heads.b", {n_src * joints});
    // each head is its own d -> J affine map
    glorot(w, latent, joints, rng);
}

template <class T> Var<T> SessionHeads<T>::forward(Tape<T> &tape, Var<T> z) {
    if (z.rank() != 2 || z.dim(1) != latent_)
        throw ShapeError("session heads: expected [N×" + std::to_string(latent_) + "], got " +
                         diff::shape_str(z.shape()));
    auto bb = tape.param(b);
    return diff::reshape(diff::linear(z, tape.param(w), &bb), {z.dim(0), n_src_, joints_});
}

template <class T> void SessionHeads<T>::visit(const ParamVisitor<T> &f) {
    f(w, false);
    f(b, false);
}

template <class T> void SessionHeads<T>::visit(const ConstParamVisitor<T> &f) const {
    f(w, false);
    f(b, false);
}

template <class T> DomainScorer<T>::DomainScorer(std::size_t n_src, std::size_t latent, Rng &rng) {
    if (n_src < 1) throw ConfigError("DomainScorer: need at least one source session");
    w = make_param<T>("scorer.w", {n_src, latent});
    b = make_param<T>("scorer.b", {n_src});
    glorot(w, latent, n_src, rng);
}

template <class T> Var<T> DomainScorer<T>::forward(Tape<T> &tape, Var<T> z) {
    if (z.rank() != 2 || z.dim(1) != w.value.dim(1))
        throw ShapeError("domain scorer: expected [N×" + std::to_string(w.value.dim(1)) + "], got " +
                         diff::shape_str(z.shape()));
    auto bb = tape.param(b);
    return diff::linear(z, tape.param(w), &bb);
}

template <class T> void DomainScorer<T>::visit(const ParamVisitor<T> &f) {
    f(w, false);
    f(b, false);
}

template <class T> void DomainScorer<T>::visit(const ConstParamVisitor<T> &f) const {
    f(w, false);
    f(b, false);
}

template class EEGEncoder<float>;
template class EEGEncoder<double>;
template class MotorEncoder<float>;
template class MotorEncoder<double>;
template class MotorDecoder<float>;
template class MotorDecoder<double>;
template class SessionHeads<float>;
template class SessionHeads<double>;
template class DomainScorer<float>;
template class DomainScorer<double>;

} // namespace ndg::nets
