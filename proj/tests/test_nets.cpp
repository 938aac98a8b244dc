// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "ndgait/diff/gradcheck.hpp"
#include "ndgait/nets/networks.hpp"
#include "test_util.hpp"

using namespace ndg;
using namespace ndg::nets;
using diff::Tape;
using diff::Tensor;
using ndg::testing::randn;

namespace {

NetConfig small_config() {
    NetConfig c;
    c.channels = 4;
    c.joints = 3;
    c.latent = 16;
    c.motor_heads = 2;
    c.motor_layers = 1;
    c.dec_channels = 4;
    return c;
}

std::vector<Parameter<double> *> trainable(const auto &visit_owner) {
    std::vector<Parameter<double> *> ps;
    const_cast<std::remove_cvref_t<decltype(visit_owner)> &>(visit_owner)
        .visit(ParamVisitor<double>([&](Parameter<double> &p, bool buf) {
            if (!buf) ps.push_back(&p);
        }));
    return ps;
}

double max_filter_norm(const Parameter<float> &w) {
    const std::size_t per = w.value.size() / w.value.dim(0);
    double mx = 0;
    for (std::size_t o = 0; o < w.value.dim(0); ++o) {
        double s = 0;
        for (std::size_t i = 0; i < per; ++i) s += std::pow(w.value[o * per + i], 2);
        mx = std::max(mx, std::sqrt(s));
    }
    return mx;
}

} // namespace

TEST(NetConfig, DefaultGeometry) {
    NetConfig c;
    EXPECT_EQ(c.eeg_filters(), (std::vector<std::size_t>{8, 16, 32, 64}));
    EXPECT_EQ(c.motor_tokens(), 25u);
    EXPECT_GE(c.decoder_raw_length(), 400u);
    EXPECT_NO_THROW(c.validate());
    c.latent = 130;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Nets, ShapeGrid) {
    for (std::size_t C : {8, 16, 64})
        for (std::size_t d : {64, 128, 256})
            for (std::size_t J : {6, 8}) {
                NetConfig cfg;
                cfg.channels = C;
                cfg.latent = d;
                cfg.joints = J;
                Rng rng(C * 1000 + d * 10 + J);
                EEGEncoder<float> fe(cfg, rng);
                MotorEncoder<float> fm(cfg, rng);
                MotorDecoder<float> g(cfg, rng);
                Tape<float> tape(0, false);
                Tensor<float> x({2, C, 400}), y({2, J, 400});
                for (auto &v : x.data) v = static_cast<float>(rng.normal());
                for (auto &v : y.data) v = static_cast<float>(rng.normal());
                auto ze = fe.forward(tape, tape.constant(x));
                auto zm = fm.forward(tape, tape.constant(y));
                auto yh = g.forward(tape, ze, NormMode::Train);
                EXPECT_EQ(ze.shape(), (diff::Shape{2, d}));
                EXPECT_EQ(zm.shape(), (diff::Shape{2, d}));
                EXPECT_EQ(yh.shape(), (diff::Shape{2, J, 400}));
            }
}

TEST(Nets, DefaultDecoderEmitsSixJointsOverFourHundredFrames) {
    NetConfig cfg;
    Rng rng(3);
    MotorDecoder<float> g(cfg, rng);
    Tape<float> tape(0, false);
    auto yh = g.forward(tape, tape.constant(Tensor<float>({3, 128}, 0.5f)), NormMode::Train);
    EXPECT_EQ(yh.dim(1), 6u);
    EXPECT_EQ(yh.dim(2), 400u);
}

TEST(Nets, ChannelMismatchIsShapeError) {
    NetConfig cfg = small_config();
    Rng rng(4);
    EEGEncoder<double> fe(cfg, rng);
    Tape<double> tape(0, false);
    EXPECT_THROW(fe.forward(tape, tape.constant(Tensor<double>({1, 5, 400}))), ShapeError);
}

TEST(Nets, IdenticalInputsGiveIdenticalEmbeddings) {
    NetConfig cfg = small_config();
    Rng rng(5);
    EEGEncoder<double> fe(cfg, rng);
    MotorEncoder<double> fm(cfg, rng);
    const Tensor<double> x = randn({1, 4, 400}, rng);
    const Tensor<double> y = randn({1, 3, 400}, rng);
    Tape<double> tape(0, false);
    const auto e1 = fe.forward(tape, tape.constant(x)).value().data;
    const auto e2 = fe.forward(tape, tape.constant(x)).value().data;
    const auto m1 = fm.forward(tape, tape.constant(y)).value().data;
    const auto m2 = fm.forward(tape, tape.constant(y)).value().data;
    EXPECT_EQ(e1, e2);
    EXPECT_EQ(m1, m2);

    // the same window twice in one batch agrees up to GEMM blocking order
    Tensor<double> x2({2, 4, 400}), y2({2, 3, 400});
    for (int n = 0; n < 2; ++n) {
        std::copy(x.data.begin(), x.data.end(), x2.data.begin() + n * 1600);
        std::copy(y.data.begin(), y.data.end(), y2.data.begin() + n * 1200);
    }
    auto ze = fe.forward(tape, tape.constant(x2));
    auto zm = fm.forward(tape, tape.constant(y2));
    for (std::size_t j = 0; j < 16; ++j) {
        EXPECT_NEAR(ze.value()[j], ze.value()[16 + j], 1e-12);
        EXPECT_NEAR(zm.value()[j], zm.value()[16 + j], 1e-12);
    }
}

TEST(Nets, PositionalEncodingMakesMotorEncoderOrderSensitive) {
    // Token order is the only thing that differs when the input is reversed in
    // blocks that map onto whole tokens: 400 samples / 25 tokens = 16 per token.
    NetConfig cfg;
    cfg.latent = 32;
    cfg.motor_heads = 2;
    Rng rng(6);
    MotorEncoder<double> fm(cfg, rng);
    const Tensor<double> y = randn({1, 6, 400}, rng);
    Tensor<double> ys = y;
    for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t tok = 0; tok < 25; ++tok)
            for (std::size_t k = 0; k < 16; ++k) ys[j * 400 + tok * 16 + k] = y[j * 400 + (24 - tok) * 16 + k];
    Tape<double> tape(0, false);
    auto a = fm.forward(tape, tape.constant(y));
    auto b = fm.forward(tape, tape.constant(ys));
    double diff = 0;
    for (std::size_t i = 0; i < 32; ++i) diff = std::max(diff, std::abs(a.value()[i] - b.value()[i]));
    EXPECT_GT(diff, 1e-6);
}

TEST(Nets, EegEncoderInputGradient) {
    NetConfig cfg = small_config();
    Rng rng(7);
    EEGEncoder<double> fe(cfg, rng);
    Parameter<double> x("x", randn({1, 4, 400}, rng));
    auto f = [&](Tape<double> &t) { return diff::sum(diff::square(fe.forward(t, t.param(x)))); };
    diff::GradCheckOptions opt;
    opt.max_entries_per_param = 40;
    const auto r = diff::finite_diff_check(f, {&x}, opt);
    EXPECT_LT(r.max_rel_error, 1e-4);
    EXPECT_GT(r.checked, 20u);
}

TEST(Nets, EegEncoderParameterGradient) {
    NetConfig cfg = small_config();
    Rng rng(8);
    EEGEncoder<double> fe(cfg, rng);
    const Tensor<double> x = randn({2, 4, 400}, rng);
    auto f = [&](Tape<double> &t) { return diff::sum(diff::square(fe.forward(t, t.constant(x)))); };
    diff::GradCheckOptions opt;
    opt.max_entries_per_param = 6;
    const auto r = diff::finite_diff_check(f, trainable(fe), opt);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
}

TEST(Nets, MotorEncoderGradient) {
    NetConfig cfg = small_config();
    Rng rng(9);
    MotorEncoder<double> fm(cfg, rng);
    const Tensor<double> y = randn({2, 3, 400}, rng);
    const Tensor<double> w = randn({2, 16}, rng);
    auto f = [&](Tape<double> &t) {
        return diff::sum(diff::mul(fm.forward(t, t.constant(y)), t.constant(w)));
    };
    diff::GradCheckOptions opt;
    opt.max_entries_per_param = 5;
    const auto r = diff::finite_diff_check(f, trainable(fm), opt);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
    EXPECT_GT(r.checked, 40u);
}

TEST(Nets, MotorDecoderGradient) {
    NetConfig cfg = small_config();
    Rng rng(10);
    MotorDecoder<double> g(cfg, rng);
    Parameter<double> z("z", randn({3, 16}, rng));
    const Tensor<double> w = randn({3, 3, 400}, rng);
    auto f = [&](Tape<double> &t) {
        return diff::sum(diff::mul(g.forward(t, t.param(z), NormMode::Train), t.constant(w)));
    };
    auto ps = trainable(g);
    ps.push_back(&z);
    diff::GradCheckOptions opt;
    opt.max_entries_per_param = 6;
    const auto r = diff::finite_diff_check(f, ps, opt);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
}

TEST(Nets, ZeroDecoderOutputsBiasPatternOnly) {
    NetConfig cfg = small_config();
    Rng rng(11);
    MotorDecoder<double> g(cfg, rng);
    g.visit(ParamVisitor<double>([](Parameter<double> &p, bool buf) {
        if (!buf) p.value.fill(0.0);
    }));
    g.tconv_b.back().value = Tensor<double>({3}, std::vector<double>{0.5, -1.0, 2.0});
    Tape<double> tape(0, false);
    auto y1 = g.forward(tape, tape.constant(randn({2, 16}, rng)), NormMode::Train);
    auto y2 = g.forward(tape, tape.constant(randn({2, 16}, rng, 5.0)), NormMode::Train);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t t = 0; t < 400; t += 37) {
                const std::size_t i = (n * 3 + j) * 400 + t;
                EXPECT_EQ(y1.value()[i], g.tconv_b.back().value[j]);
                EXPECT_EQ(y2.value()[i], y1.value()[i]);
            }
}

TEST(Nets, DoubledInputStaysFinite) {
    NetConfig cfg;
    Rng rng(12);
    EEGEncoder<float> fe(cfg, rng);
    MotorEncoder<float> fm(cfg, rng);
    Tensor<float> x({2, 16, 400}), y({2, 6, 400});
    for (auto &v : x.data) v = static_cast<float>(rng.normal());
    for (auto &v : y.data) v = static_cast<float>(rng.normal());
    for (int k = 0; k < 8; ++k) {
        Tape<float> tape(0, false);
        for (float v : fe.forward(tape, tape.constant(x)).value().data) ASSERT_TRUE(std::isfinite(v));
        for (float v : fm.forward(tape, tape.constant(y)).value().data) ASSERT_TRUE(std::isfinite(v));
        for (auto &v : x.data) v *= 2;
        for (auto &v : y.data) v *= 2;
    }
}

TEST(MaxNorm, LargeKernelIsRescaledAlongItsDirection) {
    NetConfig cfg = small_config();
    Rng rng(13);
    EEGEncoder<float> fe(cfg, rng);
    auto &w = fe.conv_w[0].value;
    const std::size_t per = w.size() / w.dim(0);
    for (std::size_t i = 0; i < per; ++i) w[i] = 0;
    w[0] = 3.0f; // filter 0 has norm 3
    for (std::size_t i = 0; i < per; ++i) w[per + i] = 0;
    w[per + 1] = 1.0f; // filter 1 has norm 1
    fe.apply_max_norm(2.0);
    EXPECT_FLOAT_EQ(w[0], 2.0f);
    for (std::size_t i = 1; i < per; ++i) EXPECT_EQ(w[i], 0.0f);
    EXPECT_EQ(w[per + 1], 1.0f);
}

TEST(MaxNorm, DirectionPreserved) {
    NetConfig cfg = small_config();
    Rng rng(14);
    EEGEncoder<double> fe(cfg, rng);
    auto &w = fe.conv_w[1].value;
    const std::size_t per = w.size() / w.dim(0);
    std::vector<double> before(w.ptr(), w.ptr() + per);
    double n = 0;
    for (double v : before) n += v * v;
    for (std::size_t i = 0; i < per; ++i) w[i] *= 3.0 / std::sqrt(n);
    fe.apply_max_norm(2.0);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < per; ++i) {
        dot += w[i] * before[i];
        na += w[i] * w[i];
        nb += before[i] * before[i];
    }
    EXPECT_NEAR(std::sqrt(na), 2.0, 1e-12);
    EXPECT_NEAR(dot / std::sqrt(na * nb), 1.0, 1e-12);
}

TEST(MaxNorm, RandomParamsEndUnderCap) {
    NetConfig cfg;
    Rng rng(15);
    EEGEncoder<float> fe(cfg, rng);
    for (auto *p : {&fe.conv_w[0], &fe.conv_w[2], &fe.proj_w})
        for (auto &v : p->value.data) v = static_cast<float>(rng.normal(0.0, 3.0));
    fe.apply_max_norm(2.0);
    for (const auto &w : fe.conv_w) EXPECT_LE(max_filter_norm(w), 2.0 + 1e-6);
    EXPECT_LE(max_filter_norm(fe.proj_w), 2.0 + 1e-6);
    EXPECT_THROW(fe.apply_max_norm(0.0), ConfigError);
}

TEST(SessionHeads, CountAndShape) {
    Rng rng(16);
    SessionHeads<double> h(49, 8, 6, rng);
    DomainScorer<double> s(49, 8, rng);
    EXPECT_EQ(h.count(), 49u);
    EXPECT_EQ(s.count(), 49u);
    Tape<double> tape(0, false);
    auto z = tape.constant(randn({3, 8}, rng));
    EXPECT_EQ(h.forward(tape, z).shape(), (diff::Shape{3, 49, 6}));
    EXPECT_EQ(s.forward(tape, z).shape(), (diff::Shape{3, 49}));
    EXPECT_THROW(SessionHeads<double>(0, 8, 6, rng), ConfigError);
}
