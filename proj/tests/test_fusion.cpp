// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ndgait/diff/gradcheck.hpp"
#include "ndgait/fusion/fusion.hpp"
#include "test_util.hpp"

using namespace ndg;
using namespace ndg::fusion;
using diff::Tape;
using diff::Tensor;
using ndg::testing::randn;

namespace {

std::vector<long double> softmax_ld(const std::vector<double> &x) {
    long double mx = x[0];
    for (double v : x) mx = std::max<long double>(mx, v);
    long double s = 0;
    std::vector<long double> e;
    for (double v : x) s += e.emplace_back(std::exp(static_cast<long double>(v) - mx));
    for (auto &v : e) v /= s;
    return e;
}

} // namespace

TEST(HeadPredict, ZeroWeightsGiveBias) {
    Rng rng(1);
    nets::SessionHeads<double> h(2, 4, 3, rng);
    h.w.value.fill(0.0);
    for (std::size_t i = 0; i < 6; ++i) h.b.value[i] = 0.5 * static_cast<double>(i);
    Tape<double> tape(0, false);
    auto y = head_predict(tape, tape.constant(randn({2, 4}, rng)), 1, h);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(y.value()[n * 3 + j], h.b.value[3 + j]);
    EXPECT_THROW(head_predict(tape, tape.constant(randn({2, 4}, rng)), 2, h), InputError);
}

TEST(HeadPredict, ScalarCase) {
    Rng rng(2);
    nets::SessionHeads<double> h(1, 1, 1, rng);
    h.w.value[0] = 2.0;
    h.b.value[0] = 1.0;
    Tape<double> tape(0, false);
    EXPECT_EQ(head_predict(tape, tape.constant(Tensor<double>({1, 1}, 3.0)), 0, h).item(), 7.0);
}

TEST(HeadPredict, MatchesMatrixVectorOracle) {
    Rng rng(3);
    nets::SessionHeads<double> h(4, 8, 6, rng);
    for (auto &v : h.b.value.data) v = rng.normal();
    const auto z = randn({5, 8}, rng);
    Tape<double> tape(0, false);
    for (std::size_t s = 0; s < 4; ++s) {
        auto y = head_predict(tape, tape.constant(z), s, h);
        for (std::size_t n = 0; n < 5; ++n)
            for (std::size_t j = 0; j < 6; ++j) {
                double ref = h.b.value[s * 6 + j];
                for (std::size_t k = 0; k < 8; ++k) ref += h.w.value[(s * 6 + j) * 8 + k] * z[n * 8 + k];
                EXPECT_NEAR(y.value()[n * 6 + j], ref, 1e-12);
            }
    }
}

TEST(DomainWeights, ZeroLogitsUnmasked) {
    Tape<double> tape(0, false);
    auto a = domain_weights(tape.constant(Tensor<double>({1, 4})), {});
    for (double v : a.value().data) EXPECT_EQ(v, 0.25);
}

TEST(DomainWeights, ZeroLogitsMaskedMiddle) {
    Tape<double> tape(0, false);
    auto a = domain_weights(tape.constant(Tensor<double>({1, 3})), {1});
    EXPECT_EQ(a.value().data, (std::vector<double>{0.5, 0.0, 0.5}));
}

TEST(DomainWeights, SoftmaxMatchesExtendedPrecision) {
    Tape<double> tape(0, false);
    auto a = domain_weights(tape.constant(Tensor<double>({1, 3}, std::vector<double>{1, 2, 3})), {});
    const auto ref = softmax_ld({1, 2, 3});
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a.value()[k], static_cast<double>(ref[k]), 1e-15);
}

TEST(DomainWeights, MaskedWeightIsExactlyZero) {
    Rng rng(4);
    for (std::size_t K : {2, 3, 10, 49}) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto logits = randn({1, K}, rng, 5.0);
            const std::size_t s = static_cast<std::size_t>(rng.below(K));
            Tape<double> tape(0, false);
            auto a = domain_weights(tape.constant(logits), {s});
            EXPECT_EQ(a.value()[s], 0.0);
            double sum = 0;
            for (double v : a.value().data) sum += v;
            EXPECT_NEAR(sum, 1.0, 1e-6);
        }
    }
}

TEST(DomainWeights, SingleSourceInTrainingIsDegenerate) {
    Tape<double> tape(0, false);
    EXPECT_THROW(domain_weights(tape.constant(Tensor<double>({1, 1})), {0}), DegenerateMaskError);
}

TEST(DomainWeights, ShiftInvariance) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto l = randn({2, 6}, rng, 2.0);
        auto shifted = l;
        const double c = rng.normal(0, 10);
        for (auto &v : shifted.data) v += c;
        Tape<double> tape(0, false);
        const Tensor<double> a = domain_weights(tape.constant(l), {}).value();
        const Tensor<double> b = domain_weights(tape.constant(shifted), {}).value();
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    }
}

TEST(Mixture, OneHotAndIdenticalHeads) {
    Rng rng(6);
    const auto H = randn({1, 3, 4}, rng);
    Tape<double> tape(0, false);
    auto y = mixture_predict(tape.constant(H), tape.constant(Tensor<double>({1, 3}, std::vector<double>{0, 1, 0})));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y.value()[j], H[4 + j]);

    Tensor<double> same({1, 3, 4});
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < 4; ++j) same[k * 4 + j] = H[j];
    auto y2 = mixture_predict(tape.constant(same), tape.constant(Tensor<double>({1, 3}, std::vector<double>{0.1, 0.6, 0.3})));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(y2.value()[j], H[j], 1e-15);
}

TEST(Mixture, WeightedSumOracle) {
    Tensor<double> H({1, 3, 2}, std::vector<double>{1, -1, 2, 0.5, -3, 4});
    Tape<double> tape(0, false);
    auto y = mixture_predict(tape.constant(H), tape.constant(Tensor<double>({1, 3}, std::vector<double>{0.2, 0.3, 0.5})));
    EXPECT_NEAR(y.value()[0], 0.2 * 1 + 0.3 * 2 + 0.5 * -3, 1e-12);
    EXPECT_NEAR(y.value()[1], 0.2 * -1 + 0.3 * 0.5 + 0.5 * 4, 1e-12);
}

TEST(Mixture, PermutationEquivariant) {
    Rng rng(7);
    nets::SessionHeads<double> h(4, 5, 3, rng);
    nets::DomainScorer<double> sc(4, 5, rng);
    for (auto &v : h.b.value.data) v = rng.normal();
    for (auto &v : sc.b.value.data) v = rng.normal();
    const auto z = randn({6, 5}, rng);
    const auto base = inference_predict(z, h, sc);

    const std::vector<std::size_t> perm{2, 0, 3, 1};
    nets::SessionHeads<double> hp = h;
    nets::DomainScorer<double> sp = sc;
    for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t j = 0; j < 3; ++j) {
            hp.b.value[k * 3 + j] = h.b.value[perm[k] * 3 + j];
            for (std::size_t e = 0; e < 5; ++e)
                hp.w.value[(k * 3 + j) * 5 + e] = h.w.value[(perm[k] * 3 + j) * 5 + e];
        }
        sp.b.value[k] = sc.b.value[perm[k]];
        for (std::size_t e = 0; e < 5; ++e) sp.w.value[k * 5 + e] = sc.w.value[perm[k] * 5 + e];
    }
    const auto moved = inference_predict(z, hp, sp);
    for (std::size_t i = 0; i < base.yhat.size(); ++i) EXPECT_NEAR(moved.yhat[i], base.yhat[i], 1e-12);
}

TEST(Losses, SupervisedAndFusionExamples) {
    Tape<double> tape(0, false);
    Rng rng(8);
    const auto y = randn({3, 6}, rng);
    EXPECT_EQ(loss_supervised(tape.constant(y), tape.constant(y)).item(), 0.0);
    EXPECT_EQ(loss_domain_fusion(tape.constant(y), tape.constant(y)).item(), 0.0);
    Tensor<double> e({1, 6});
    e[0] = 1.0;
    EXPECT_EQ(loss_supervised(tape.constant(e), tape.constant(Tensor<double>({1, 6}))).item(), 1.0);
    EXPECT_EQ(loss_domain_fusion(tape.constant(e), tape.constant(Tensor<double>({1, 6}))).item(), 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = randn({4, 6}, rng), b = randn({4, 6}, rng);
        double ref = 0;
        for (std::size_t i = 0; i < 24; ++i) ref += (a[i] - b[i]) * (a[i] - b[i]);
        ref /= 4;
        EXPECT_NEAR(loss_supervised(tape.constant(a), tape.constant(b)).item(), ref, 1e-12);
        EXPECT_NEAR(loss_domain_fusion(tape.constant(a), tape.constant(b)).item(), ref, 1e-12);
    }
}

TEST(Stage2, TotalIsSumAndSupMatchesOwnHeads) {
    Rng rng(9);
    nets::SessionHeads<double> h(3, 4, 2, rng);
    nets::DomainScorer<double> sc(3, 4, rng);
    const auto z = randn({5, 4}, rng), y = randn({5, 2}, rng);
    const std::vector<std::size_t> sess{0, 2, 1, 1, 0};
    Tape<double> tape(0, false);
    const auto l = stage2_total(tape, tape.constant(z), sess, tape.constant(y), h, sc);
    EXPECT_NEAR(l.total.item(), l.sup + l.df, 1e-12);

    double ref = 0;
    for (std::size_t n = 0; n < 5; ++n)
        for (std::size_t j = 0; j < 2; ++j) {
            double p = h.b.value[sess[n] * 2 + j];
            for (std::size_t e = 0; e < 4; ++e) p += h.w.value[(sess[n] * 2 + j) * 4 + e] * z[n * 4 + e];
            ref += (p - y[n * 2 + j]) * (p - y[n * 2 + j]);
        }
    EXPECT_NEAR(l.sup, ref / 5, 1e-12);

    Stage2Terms nf;
    nf.fusion = false;
    const auto l2 = stage2_total(tape, tape.constant(z), sess, tape.constant(y), h, sc, nf);
    EXPECT_TRUE(std::isnan(l2.df));
    EXPECT_NEAR(l2.total.item(), l.sup, 1e-12);
}

TEST(Stage2, ComponentsAddToOne) {
    // weights chosen so the weighted components are 0.4 and 0.6
    Rng rng(10);
    nets::SessionHeads<double> h(3, 4, 2, rng);
    nets::DomainScorer<double> sc(3, 4, rng);
    const auto z = randn({4, 4}, rng), y = randn({4, 2}, rng);
    const std::vector<std::size_t> sess{0, 1, 2, 0};
    Tape<double> tape(0, false);
    const auto base = stage2_total(tape, tape.constant(z), sess, tape.constant(y), h, sc);
    Stage2Terms w;
    w.w_sup = 0.4 / base.sup;
    w.w_df = 0.6 / base.df;
    EXPECT_NEAR(stage2_total(tape, tape.constant(z), sess, tape.constant(y), h, sc, w).total.item(), 1.0, 1e-12);
}

TEST(Stage2, MaskedHeadGetsNoFusionGradient) {
    Rng rng(11);
    nets::SessionHeads<double> h(3, 4, 2, rng);
    nets::DomainScorer<double> sc(3, 4, rng);
    const auto z = randn({6, 4}, rng), y = randn({6, 2}, rng);
    const std::vector<std::size_t> sess(6, 1);
    Tape<double> tape(0, true);
    auto H = h.forward(tape, tape.constant(z));
    auto alpha = domain_weights(sc.forward(tape, tape.constant(z)), sess);
    auto df = loss_domain_fusion(mixture_predict(H, alpha), tape.constant(y));
    tape.backward(df);
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_EQ(h.b.grad[2 + j], 0.0);
        for (std::size_t e = 0; e < 4; ++e) EXPECT_EQ(h.w.grad[(2 + j) * 4 + e], 0.0);
    }
    double other = 0;
    for (std::size_t i = 0; i < 2; ++i) other += std::abs(h.b.grad[i]) + std::abs(h.b.grad[4 + i]);
    EXPECT_GT(other, 0.0);
}

TEST(Stage2, FrozenEncoderReceivesNoGradient) {
    Rng rng(12);
    nets::SessionHeads<double> h(3, 4, 2, rng);
    nets::DomainScorer<double> sc(3, 4, rng);
    diff::Parameter<double> enc("enc", randn({5, 4}, rng), false);
    Tape<double> tape(0, true);
    const auto l = stage2_total(tape, tape.param(enc), {0, 1, 2, 0, 1}, tape.constant(randn({5, 2}, rng)), h, sc);
    tape.backward(l.total);
    for (double g : enc.grad.data) EXPECT_EQ(g, 0.0);
}

TEST(Stage2, GradientCheckThreeSessions) {
    Rng rng(13);
    nets::SessionHeads<double> h(3, 6, 4, rng);
    nets::DomainScorer<double> sc(3, 6, rng);
    const auto z = randn({9, 6}, rng), y = randn({9, 4}, rng);
    const std::vector<std::size_t> sess{0, 1, 2, 0, 1, 2, 2, 1, 0};
    auto f = [&](Tape<double> &t) {
        return stage2_total(t, t.constant(z), sess, t.constant(y), h, sc).total;
    };
    const auto r = diff::finite_diff_check(f, {&h.w, &h.b, &sc.w, &sc.b});
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
    EXPECT_EQ(r.checked, h.w.value.size() + h.b.value.size() + sc.w.value.size() + sc.b.value.size());
}

TEST(Inference, SingleSourceAndUniformEntropy) {
    Rng rng(14);
    nets::SessionHeads<double> h1(1, 4, 2, rng);
    nets::DomainScorer<double> s1(1, 4, rng);
    const auto z = randn({3, 4}, rng);
    const auto p1 = inference_predict(z, h1, s1);
    Tape<double> tape(0, false);
    auto only = head_predict(tape, tape.constant(z), 0, h1);
    for (std::size_t n = 0; n < 3; ++n) {
        EXPECT_EQ(p1.alpha[n], 1.0);
        EXPECT_EQ(p1.entropy[n], 0.0);
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(p1.yhat[n * 2 + j], only.value()[n * 2 + j], 1e-15);
    }
    nets::SessionHeads<double> h5(5, 4, 2, rng);
    nets::DomainScorer<double> s5(5, 4, rng);
    const auto pu = inference_predict(z, h5, s5, true);
    for (double e : pu.entropy) EXPECT_NEAR(e, std::log(5.0), 1e-12);
}

TEST(Inference, ComposedOracleTwoHeads) {
    Rng rng(15);
    nets::SessionHeads<double> h(2, 2, 1, rng);
    nets::DomainScorer<double> sc(2, 2, rng);
    h.w.value = Tensor<double>({2, 2}, std::vector<double>{1, 0, 0, 2});
    h.b.value = Tensor<double>({2}, std::vector<double>{0.5, -0.5});
    sc.w.value = Tensor<double>({2, 2}, std::vector<double>{0.3, -0.1, -0.2, 0.4});
    sc.b.value = Tensor<double>({2}, std::vector<double>{0.0, 0.1});
    const Tensor<double> z({1, 2}, std::vector<double>{1.5, -0.7});
    const double h0 = 1.5 + 0.5, h1 = 2 * -0.7 - 0.5;
    const auto a = softmax_ld({0.3 * 1.5 + 0.1 * 0.7, -0.2 * 1.5 - 0.4 * 0.7 + 0.1});
    const auto p = inference_predict(z, h, sc);
    EXPECT_NEAR(p.yhat[0], static_cast<double>(a[0] * h0 + a[1] * h1), 1e-12);
    EXPECT_NEAR(p.alpha[0], static_cast<double>(a[0]), 1e-12);
}

TEST(Entropy, BoundsAndContract) {
    Rng rng(16);
    for (std::size_t K : {2, 3, 10, 49})
        for (int trial = 0; trial < 50; ++trial) {
            const auto l = randn({1, K}, rng, 4.0);
            Tape<double> tape(0, false);
            const auto a = domain_weights(tape.constant(l), {}).value().data;
            const double h = attention_entropy(a);
            EXPECT_GE(h, 0.0);
            EXPECT_LE(h, std::log(static_cast<double>(K)) + 1e-12);
        }
    EXPECT_EQ(attention_entropy({1.0, 0.0}), 0.0);
    EXPECT_THROW(attention_entropy({0.5, 0.6}), ContractError);
    EXPECT_THROW(attention_entropy({1.5, -0.5}), ContractError);
}
