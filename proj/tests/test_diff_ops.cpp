// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include <gtest/gtest.h>

#include "ndgait/diff/gradcheck.hpp"
#include "ndgait/diff/ops.hpp"
#include "test_util.hpp"

using namespace ndg;
using namespace ndg::diff;
using ndg::testing::randn;

namespace {

using TD = Tensor<double>;

TD mat(std::size_t r, std::size_t c, std::vector<double> v) { return TD({r, c}, std::move(v)); }

} // namespace

TEST(Matmul, IdentityLeftOperand) {
    Tape<double> t;
    auto y = matmul(t.constant(mat(2, 2, {1, 0, 0, 1})), t.constant(mat(2, 2, {1, 2, 3, 4})));
    EXPECT_EQ(y.value().data, (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, RowTimesColumnIsDotProduct) {
    Tape<double> t;
    auto y = matmul(t.constant(mat(1, 2, {1, 2})), t.constant(mat(2, 1, {3, 4})));
    EXPECT_EQ(y.shape(), (Shape{1, 1}));
    EXPECT_EQ(y.item(), 1.0 * 3 + 2.0 * 4);
}

TEST(Matmul, ZeroMatrixGivesZero) {
    Tape<double> t;
    Rng rng(3);
    auto y = matmul(t.constant(TD({3, 4})), t.constant(randn({4, 5}, rng)));
    for (double v : y.value().data) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, InnerDimensionMismatchThrows) {
    Tape<double> t;
    EXPECT_THROW(matmul(t.constant(TD({2, 3})), t.constant(TD({2, 3}))), ShapeError);
}

TEST(Matmul, BackwardMatchesTransposedProducts) {
    Rng rng(5);
    Tape<double> t;
    auto A = t.leaf(randn({3, 4}, rng));
    auto B = t.leaf(randn({4, 2}, rng));
    const TD G = randn({3, 2}, rng);
    t.backward(sum(mul(matmul(A, B), t.constant(G))));
    // dA = G·Bᵀ, dB = Aᵀ·G
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 4; ++k) {
            double e = 0;
            for (std::size_t j = 0; j < 2; ++j) e += G.at(i, j) * B.value().at(k, j);
            EXPECT_NEAR(t.grad(A).at(i, k), e, 1e-12);
        }
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t j = 0; j < 2; ++j) {
            double e = 0;
            for (std::size_t i = 0; i < 3; ++i) e += A.value().at(i, k) * G.at(i, j);
            EXPECT_NEAR(t.grad(B).at(k, j), e, 1e-12);
        }
}

TEST(Conv1d, IdentityKernel) {
    Tape<double> t;
    auto y = conv1d(t.constant(mat(1, 4, {1, 2, 3, 4})), t.constant(TD({1, 1, 1}, {1.0})));
    EXPECT_EQ(y.value().data, (std::vector<double>{1, 2, 3, 4}));
}

TEST(Conv1d, SlidingSum) {
    Tape<double> t;
    auto y = conv1d(t.constant(mat(1, 3, {1, 2, 3})), t.constant(TD({1, 1, 2}, {1.0, 1.0})));
    EXPECT_EQ(y.value().data, (std::vector<double>{3, 5}));
}

TEST(Conv1d, ZeroInputGivesZero) {
    Tape<double> t;
    Rng rng(1);
    auto y = conv1d(t.constant(TD({2, 9})), t.constant(randn({3, 2, 4}, rng)), nullptr, 2, 1);
    EXPECT_EQ(y.shape(), (Shape{3, (9 + 2 - 4) / 2 + 1}));
    for (double v : y.value().data) EXPECT_EQ(v, 0.0);
}

TEST(Conv1d, MatchesDirectLoopWithStrideAndPadding) {
    Rng rng(11);
    Tape<double> t;
    const TD x = randn({2, 3, 11}, rng), w = randn({4, 3, 3}, rng), b = randn({4}, rng);
    auto bv = t.constant(b);
    auto y = conv1d(t.constant(x), t.constant(w), &bv, 2, 1);
    const std::size_t To = (11 + 2 - 3) / 2 + 1;
    ASSERT_EQ(y.shape(), (Shape{2, 4, To}));
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t co = 0; co < 4; ++co)
            for (std::size_t o = 0; o < To; ++o) {
                double e = b[co];
                for (std::size_t ci = 0; ci < 3; ++ci)
                    for (std::size_t k = 0; k < 3; ++k) {
                        const long p = static_cast<long>(o * 2 + k) - 1;
                        if (p >= 0 && p < 11) e += w.at(co, ci, k) * x.at(n, ci, p);
                    }
                EXPECT_NEAR(y.value().at(n, co, o), e, 1e-12);
            }
}

TEST(Conv1d, KernelLongerThanPaddedInputThrows) {
    Tape<double> t;
    EXPECT_THROW(conv1d(t.constant(TD({1, 3})), t.constant(TD({1, 1, 6})), nullptr, 1, 1), ShapeError);
}

TEST(Conv1dTranspose, ScatterAdd) {
    Tape<double> t;
    auto y = conv1d_transpose(t.constant(mat(1, 1, {5})), t.constant(TD({1, 1, 2}, {1.0, 1.0})), nullptr, 2);
    EXPECT_EQ(y.value().data, (std::vector<double>{5, 5}));
}

TEST(Conv1dTranspose, UnitKernelIsIdentity) {
    Tape<double> t;
    auto y = conv1d_transpose(t.constant(mat(1, 3, {1, -2, 7})), t.constant(TD({1, 1, 1}, {1.0})));
    EXPECT_EQ(y.value().data, (std::vector<double>{1, -2, 7}));
}

TEST(Conv1dTranspose, NegativeOutPadIsConfigError) {
    Tape<double> t;
    EXPECT_THROW(conv1d_transpose(t.constant(TD({1, 3})), t.constant(TD({1, 1, 2})), nullptr, 1, -1),
                 ConfigError);
}

TEST(Conv1dTranspose, ForwardEqualsConvBackward) {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t Cin = 1 + rng.below(3), Cout = 1 + rng.below(3), K = 1 + rng.below(4);
        const std::size_t s = 1 + rng.below(3), Tin = K + rng.below(9);
        const std::size_t To = (Tin - K) / s + 1;
        const TD w = randn({Cout, Cin, K}, rng);
        const TD gy = randn({Cout, To}, rng);
        Tape<double> t;
        auto x = t.leaf(randn({Cin, Tin}, rng));
        t.backward(sum(mul(conv1d(x, t.constant(w), nullptr, s), t.constant(gy))));
        const long op = static_cast<long>(Tin) - static_cast<long>((To - 1) * s + K);
        auto xt = conv1d_transpose(t.constant(gy), t.constant(w), nullptr, s, op);
        ASSERT_EQ(xt.shape(), x.shape());
        for (std::size_t i = 0; i < xt.size(); ++i) EXPECT_NEAR(xt.value()[i], t.grad(x)[i], 1e-12);
    }
}

TEST(Conv1dTranspose, AdjointInnerProductIdentity) {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t Cin = 1 + rng.below(4), Cout = 1 + rng.below(4), K = 1 + rng.below(5);
        const std::size_t s = 1 + rng.below(3), Tin = K + rng.below(12), N = 1 + rng.below(3);
        const std::size_t To = (Tin - K) / s + 1;
        const long op = static_cast<long>(Tin) - static_cast<long>((To - 1) * s + K);
        const TD x = randn({N, Cin, Tin}, rng), y = randn({N, Cout, To}, rng), w = randn({Cout, Cin, K}, rng);
        Tape<double> t;
        const double lhs = ndg::testing::dot(conv1d(t.constant(x), t.constant(w), nullptr, s).value(), y);
        const double rhs =
            ndg::testing::dot(x, conv1d_transpose(t.constant(y), t.constant(w), nullptr, s, op).value());
        EXPECT_NEAR(lhs, rhs, 1e-10);
    }
}

TEST(Attention, SingleKeyReturnsValueRow) {
    Rng rng(2);
    Tape<double> t;
    auto V = t.constant(mat(1, 3, {0.5, -1.0, 2.0}));
    auto y = scaled_dot_attention(t.constant(randn({4, 2}, rng)), t.constant(randn({1, 2}, rng)), V);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(y.value().at(i, j), V.value()[j]);
}

TEST(Attention, IdenticalKeysAverageValues) {
    Rng rng(4);
    Tape<double> t;
    const TD V = randn({3, 2}, rng);
    auto y = scaled_dot_attention(t.constant(randn({2, 2}, rng)), t.constant(mat(3, 2, {1, 2, 1, 2, 1, 2})),
                                  t.constant(V));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            EXPECT_NEAR(y.value().at(i, j), (V.at(0, j) + V.at(1, j) + V.at(2, j)) / 3.0, 1e-14);
}

TEST(Attention, TwoKeyScalarSoftmax) {
    Tape<double> t;
    auto y = scaled_dot_attention(t.constant(mat(1, 2, {1, 0})), t.constant(mat(2, 2, {1, 0, 0, 1})),
                                  t.constant(mat(2, 1, {1, 0})));
    const double a = 1.0 / std::sqrt(2.0);
    const double sigma = std::exp(a) / (std::exp(a) + std::exp(0.0));
    EXPECT_NEAR(y.item(), sigma, 1e-15);
}

TEST(Attention, WeightsSumToOne) {
    // with V = I the output rows are the attention rows themselves
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.below(5), m = 1 + rng.below(6), dh = 1 + rng.below(4);
        TD eye({m, m});
        for (std::size_t i = 0; i < m; ++i) eye.at(i, i) = 1.0;
        Tape<double> t;
        auto y = scaled_dot_attention(t.constant(randn({n, dh}, rng, 3.0)), t.constant(randn({m, dh}, rng, 3.0)),
                                      t.constant(eye));
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < m; ++j) s += y.value().at(i, j);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(LogSumExp, Examples) {
    Tape<double> t;
    EXPECT_NEAR(logsumexp(t.constant(TD({2}, {0.0, 0.0}))).item(), std::log(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(logsumexp(t.constant(TD({1}, {-3.25}))).item(), -3.25);
    // long double direct summation
    const long double ref = std::log(std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L));
    EXPECT_NEAR(logsumexp(t.constant(TD({3}, {1.0, 2.0, 3.0}))).item(), static_cast<double>(ref), 1e-14);
    EXPECT_NEAR(static_cast<double>(ref), 3.40760596444438, 1e-13);
}

TEST(LogSumExp, EmptyInputIsDomainError) {
    Tape<double> t;
    EXPECT_THROW(logsumexp(t.constant(TD({0}))), DomainError);
}

TEST(LogSumExp, ShiftIdentity) {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(10);
        TD x = randn({n}, rng, 5.0);
        const double c = rng.uniform(-50, 50);
        TD xc = x;
        for (auto &v : xc.data) v += c;
        Tape<double> t;
        const double d = logsumexp(t.constant(xc)).item() - logsumexp(t.constant(x)).item() - c;
        EXPECT_LT(std::abs(d), 1e-12);
    }
}

TEST(LogSumExp, LargeLogitsStayFinite) {
    Tape<double> t;
    const double v = logsumexp(t.constant(TD({2}, {1000.0, 1000.0}))).item();
    EXPECT_NEAR(v, 1000.0 + std::log(2.0), 1e-12);
}

TEST(SuffixLogSumExp, MatchesDirectSums) {
    Rng rng(9);
    const TD x = randn({3, 5}, rng, 2.0);
    Tape<double> t;
    auto y = suffix_logsumexp_last(t.constant(x));
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t j = 0; j < 5; ++j) {
            long double s = 0;
            for (std::size_t k = j; k < 5; ++k) s += std::exp(static_cast<long double>(x.at(r, k)));
            EXPECT_NEAR(y.value().at(r, j), static_cast<double>(std::log(s)), 1e-13);
        }
}

TEST(BatchNorm, StandardizedInputPassesThrough) {
    // per channel: values ±1 over batch×time have mean 0, biased variance 1
    TD x({2, 2, 2}, {1, -1, 2, -2, -1, 1, -2, 2});
    // channel 1 has variance 4; rescale it to 1
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t l = 0; l < 2; ++l) x.at(n, 1, l) /= 2.0;
    Tape<double> t;
    auto y = batchnorm1d(t.constant(x), t.constant(TD({2}, 1.0)), t.constant(TD({2}, 0.0)), BatchNormStats<double>{},
                         NormMode::Train, 1e-8);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LT(std::abs(y.value()[i] - x[i]), 1e-6);
}

TEST(BatchNorm, ZeroGammaGivesBeta) {
    Rng rng(10);
    Tape<double> t;
    auto y = batchnorm1d(t.constant(randn({3, 2, 5}, rng)), t.constant(TD({2}, 0.0)),
                         t.constant(TD({2}, {0.5, -1.5})), BatchNormStats<double>{}, NormMode::Train);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t l = 0; l < 5; ++l) {
            EXPECT_EQ(y.value().at(n, 0, l), 0.5);
            EXPECT_EQ(y.value().at(n, 1, l), -1.5);
        }
}

TEST(BatchNorm, TrainModeMoments) {
    Rng rng(12);
    Tape<double> t;
    auto y = batchnorm1d(t.constant(randn({4, 3, 50}, rng, 7.0)), t.constant(TD({3}, 1.0)),
                         t.constant(TD({3}, 0.0)), BatchNormStats<double>{}, NormMode::Train);
    for (std::size_t c = 0; c < 3; ++c) {
        double m = 0, v = 0;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t l = 0; l < 50; ++l) m += y.value().at(n, c, l);
        m /= 200;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t l = 0; l < 50; ++l) v += std::pow(y.value().at(n, c, l) - m, 2);
        v /= 200;
        EXPECT_LT(std::abs(m), 1e-6);
        EXPECT_LT(std::abs(v - 1.0), 1e-5);
    }
}

TEST(BatchNorm, DegenerateBatchThrows) {
    Tape<double> t;
    EXPECT_THROW(batchnorm1d(t.constant(TD({1, 2, 1})), t.constant(TD({2}, 1.0)), t.constant(TD({2}, 0.0)),
                             BatchNormStats<double>{}, NormMode::Train),
                 DegenerateBatchError);
}

TEST(BatchNorm, EvalUsesRunningStatistics) {
    Rng rng(13);
    TD rm({2}, {1.0, -2.0}), rv({2}, {4.0, 0.25});
    BatchNormStats<double> st{&rm, &rv, 0.1, true};
    const TD x = randn({2, 2, 3}, rng);
    Tape<double> t;
    auto y = batchnorm1d(t.constant(x), t.constant(TD({2}, 1.0)), t.constant(TD({2}, 0.0)), st, NormMode::Eval, 0.0);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t l = 0; l < 3; ++l) {
            EXPECT_NEAR(y.value().at(n, 0, l), (x.at(n, 0, l) - 1.0) / 2.0, 1e-14);
            EXPECT_NEAR(y.value().at(n, 1, l), (x.at(n, 1, l) + 2.0) / 0.5, 1e-14);
        }
    EXPECT_EQ(rm[0], 1.0);
}

TEST(BatchNorm, RunningStatisticsUpdate) {
    TD x({1, 1, 4}, {1, 2, 3, 4});
    TD rm({1}, 0.0), rv({1}, 1.0);
    Tape<double> t;
    batchnorm1d(t.constant(x), t.constant(TD({1}, 1.0)), t.constant(TD({1}, 0.0)),
                BatchNormStats<double>{&rm, &rv, 0.1, true}, NormMode::Train);
    EXPECT_NEAR(rm[0], 0.1 * 2.5, 1e-15);
    EXPECT_NEAR(rv[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-15);
}

TEST(MaskedSoftmax, MaskedEntriesAreExactlyZero) {
    Tape<double> t;
    auto y = masked_softmax_last(t.constant(TD({1, 3}, {0.0, 0.0, 0.0})), std::vector<std::uint8_t>{0, 1, 0});
    EXPECT_EQ(y.value().data, (std::vector<double>{0.5, 0.0, 0.5}));
    EXPECT_THROW(masked_softmax_last(t.constant(TD({1, 2})), std::vector<std::uint8_t>{1, 1}), DegenerateMaskError);
}

TEST(Permute, ThreeAxisRoundTrip) {
    Rng rng(14);
    Tape<double> t;
    const TD x = randn({2, 3, 4}, rng);
    auto y = permute(t.constant(x), {2, 0, 1});
    ASSERT_EQ(y.shape(), (Shape{4, 2, 3}));
    EXPECT_EQ(y.value().at(3, 1, 2), x.at(1, 2, 3));
    auto z = permute(y, {1, 2, 0});
    EXPECT_EQ(z.value().data, x.data);
}

// ---------------------------------------------------------------------------
// Gradient checks for every differentiable operation over 20 seeds.

namespace {

struct OpCase {
    std::vector<Shape> shapes;
    std::function<Var<double>(Tape<double> &, std::vector<Var<double>> &)> build;
    double scale = 1.0;
    bool positive = false;
};

std::map<std::string, OpCase> op_cases() {
    std::map<std::string, OpCase> m;
    m["add"] = {{{3, 4}, {3, 4}}, [](auto &, auto &v) { return add(v[0], v[1]); }};
    m["sub"] = {{{3, 4}, {3, 4}}, [](auto &, auto &v) { return sub(v[0], v[1]); }};
    m["mul"] = {{{3, 4}, {3, 4}}, [](auto &, auto &v) { return mul(v[0], v[1]); }};
    m["scale"] = {{{5}}, [](auto &, auto &v) { return scale(v[0], -1.7); }};
    m["mul_scalar"] = {{{2, 3}, {1}}, [](auto &, auto &v) { return mul_scalar(v[0], v[1]); }};
    m["add_scalar"] = {{{2, 3}, {1}}, [](auto &, auto &v) { return add_scalar(v[0], v[1]); }};
    m["add_last"] = {{{2, 3, 4}, {4}}, [](auto &, auto &v) { return add_last(v[0], v[1]); }};
    m["add_channel"] = {{{2, 3, 4}, {3}}, [](auto &, auto &v) { return add_channel(v[0], v[1]); }};
    m["square"] = {{{6}}, [](auto &, auto &v) { return square(v[0]); }};
    m["reciprocal"] = {{{6}}, [](auto &, auto &v) { return reciprocal(v[0]); }, 1.0, true};
    m["exp"] = {{{6}}, [](auto &, auto &v) { return exp(v[0]); }};
    m["relu"] = {{{12}}, [](auto &, auto &v) { return relu(v[0]); }};
    m["elu"] = {{{12}}, [](auto &, auto &v) { return elu(v[0]); }};
    m["clamp_min"] = {{{12}}, [](auto &, auto &v) { return clamp_min(v[0], 0.1); }};
    m["sum_last"] = {{{3, 5}}, [](auto &, auto &v) { return sum_last(v[0]); }};
    m["mean_axis1"] = {{{2, 3, 4}}, [](auto &, auto &v) { return mean_axis1(v[0]); }};
    m["mean"] = {{{2, 3}}, [](auto &, auto &v) { return mean(v[0]); }};
    m["reshape"] = {{{2, 6}}, [](auto &, auto &v) { return reshape(v[0], Shape{3, 4}); }};
    m["permute"] = {{{2, 3, 4}}, [](auto &, auto &v) { return permute(v[0], {1, 2, 0}); }};
    m["gather_rows"] = {{{4, 3}}, [](auto &, auto &v) { return gather_rows(v[0], {3, 0, 0, 2}); }};
    m["take"] = {{{4, 3}}, [](auto &, auto &v) { return take(v[0], {11, 0, 5, 5}, Shape{2, 2}); }};
    m["select_last"] = {{{2, 3, 5}}, [](auto &, auto &v) { return select_last(v[0], 4); }};
    m["fit_length_trim"] = {{{2, 2, 7}}, [](auto &, auto &v) { return fit_length(v[0], 5); }};
    m["fit_length_pad"] = {{{2, 2, 4}}, [](auto &, auto &v) { return fit_length(v[0], 6); }};
    m["matmul"] = {{{3, 4}, {4, 2}}, [](auto &, auto &v) { return matmul(v[0], v[1]); }};
    m["linear"] = {{{3, 4}, {5, 4}, {5}}, [](auto &, auto &v) { return linear(v[0], v[1], &v[2]); }};
    m["bmm"] = {{{2, 3, 4}, {2, 4, 2}}, [](auto &, auto &v) { return bmm(v[0], v[1]); }};
    m["bmm_t"] = {{{2, 3, 4}, {2, 5, 4}}, [](auto &, auto &v) { return bmm(v[0], v[1], true); }};
    m["softmax_last"] = {{{3, 4}}, [](auto &, auto &v) { return softmax_last(v[0]); }, 2.0};
    m["masked_softmax"] = {{{2, 3}}, [](auto &, auto &v) {
                               return masked_softmax_last(v[0], std::vector<std::uint8_t>{0, 1, 0, 1, 0, 0});
                           }};
    m["logsumexp_last"] = {{{3, 4}}, [](auto &, auto &v) { return logsumexp_last(v[0]); }, 3.0};
    m["suffix_logsumexp"] = {{{3, 5}}, [](auto &, auto &v) { return suffix_logsumexp_last(v[0]); }, 3.0};
    m["l2_normalize"] = {{{3, 4}}, [](auto &, auto &v) { return l2_normalize_last(v[0]); }};
    m["attention"] = {{{3, 2}, {4, 2}, {4, 3}}, [](auto &, auto &v) {
                          return scaled_dot_attention(v[0], v[1], v[2]);
                      }};
    m["attention_batched"] = {{{2, 3, 2}, {2, 4, 2}, {2, 4, 3}}, [](auto &, auto &v) {
                                  return scaled_dot_attention(v[0], v[1], v[2]);
                              }};
    m["conv1d"] = {{{2, 2, 9}, {3, 2, 3}, {3}}, [](auto &, auto &v) { return conv1d(v[0], v[1], &v[2], 2, 1); }};
    m["conv1d_transpose"] = {{{2, 2, 4}, {2, 3, 4}, {3}}, [](auto &, auto &v) {
                                 return conv1d_transpose(v[0], v[1], &v[2], 2, 1);
                             }};
    m["maxpool1d"] = {{{2, 2, 8}}, [](auto &, auto &v) { return maxpool1d(v[0], 2); }};
    m["avgpool1d"] = {{{2, 2, 9}}, [](auto &, auto &v) { return avgpool1d(v[0], 3); }};
    m["batchnorm_train"] = {{{3, 2, 4}, {2}, {2}}, [](auto &, auto &v) {
                                return batchnorm1d(v[0], v[1], v[2], BatchNormStats<double>{}, NormMode::Train);
                            }};
    m["layernorm"] = {{{3, 5}, {5}, {5}}, [](auto &, auto &v) { return layernorm_last(v[0], v[1], v[2]); }};
    return m;
}

} // namespace

class OpGradCheck : public ::testing::TestWithParam<std::string> {};

TEST_P(OpGradCheck, TwentySeeds) {
    const auto cases = op_cases();
    const OpCase &oc = cases.at(GetParam());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        std::vector<Parameter<double>> params;
        params.reserve(oc.shapes.size());
        for (std::size_t i = 0; i < oc.shapes.size(); ++i) {
            TD v = randn(oc.shapes[i], rng, oc.scale);
            if (oc.positive)
                for (auto &e : v.data) e = 0.5 + std::abs(e);
            params.emplace_back("p" + std::to_string(i), v);
        }
        Tape<double> probe(0, false);
        std::vector<Var<double>> pv;
        for (auto &p : params) pv.push_back(probe.param(p));
        const Shape out_shape = oc.build(probe, pv).shape();
        const TD weight = randn(out_shape, rng);
        LossFn f = [&](Tape<double> &t) {
            std::vector<Var<double>> v;
            for (auto &p : params) v.push_back(t.param(p));
            return sum(mul(oc.build(t, v), t.constant(weight)));
        };
        std::vector<Parameter<double> *> ptrs;
        for (auto &p : params) ptrs.push_back(&p);
        const auto r = finite_diff_check(f, ptrs);
        EXPECT_LT(r.max_rel_error, 1e-4) << GetParam() << " seed " << seed << " worst " << r.worst_param << "["
                                         << r.worst_index << "]";
        EXPECT_GT(r.checked, 0u);
    }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradCheck, ::testing::ValuesIn([] {
                             std::vector<std::string> names;
                             for (const auto &kv : op_cases()) names.push_back(kv.first);
                             return names;
                         }()),
                         [](const auto &info) { return info.param; });
