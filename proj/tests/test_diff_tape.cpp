// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "ndgait/diff/gradcheck.hpp"
#include "ndgait/diff/ops.hpp"
#include "test_util.hpp"

using namespace ndg;
using namespace ndg::diff;
using ndg::testing::randn;
using TD = Tensor<double>;

TEST(Backward, SquareAtThree) {
    Tape<double> t;
    auto x = t.leaf(TD({1}, {3.0}));
    t.backward(sum(square(x)));
    EXPECT_EQ(t.grad(x)[0], 6.0);
}

TEST(Backward, InactiveRelu) {
    Tape<double> t;
    auto x = t.leaf(TD({1}, {-1.0}));
    t.backward(sum(relu(x)));
    EXPECT_EQ(t.grad(x)[0], 0.0);
}

TEST(Backward, MseMatchesSymbolicGradient) {
    Rng rng(31);
    const TD A = randn({3, 3}, rng), y = randn({3, 1}, rng);
    Tape<double> t;
    auto x = t.leaf(randn({3, 1}, rng));
    auto r = sub(matmul(t.constant(A), x), t.constant(y));
    t.backward(scale(sum(square(r)), 1.0 / 3.0));
    // 2 Aᵀ (A x − y) / n
    for (std::size_t k = 0; k < 3; ++k) {
        double e = 0;
        for (std::size_t i = 0; i < 3; ++i) e += A.at(i, k) * r.value()[i];
        EXPECT_NEAR(t.grad(x)[k], 2.0 * e / 3.0, 1e-13);
    }
}

TEST(Backward, NonScalarRootIsContractError) {
    Tape<double> t;
    auto x = t.leaf(TD({2}, {1.0, 2.0}));
    EXPECT_THROW(t.backward(square(x)), ContractError);
}

TEST(Backward, SecondPassDoublesLeafGradients) {
    Rng rng(32);
    Tape<double> t;
    auto x = t.leaf(randn({4}, rng));
    Parameter<double> w("w", randn({4}, rng));
    auto root = sum(mul(square(x), t.param(w)));
    t.backward(root);
    const TD g1 = t.grad(x);
    const TD gw1 = w.grad;
    t.backward(root);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(t.grad(x)[i], 2.0 * g1[i]);
        EXPECT_DOUBLE_EQ(w.grad[i], 2.0 * gw1[i]);
    }
}

TEST(Backward, SharedNodeAccumulates) {
    Tape<double> t;
    auto x = t.leaf(TD({1}, {2.0}));
    auto y = mul(x, x);
    t.backward(sum(add(y, y)));
    EXPECT_EQ(t.grad(x)[0], 8.0);
}

TEST(Backward, FrozenParameterGetsNoGradient) {
    Parameter<double> w("w", TD({2}, {1.0, 2.0}), false);
    Tape<double> t;
    auto x = t.leaf(TD({2}, {3.0, 4.0}));
    t.backward(sum(mul(x, t.param(w))));
    EXPECT_EQ(w.grad[0], 0.0);
    EXPECT_EQ(t.grad(x)[1], 2.0);
}

TEST(Tape, SameSeedReproducesForwardBitwise) {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tape<double> t(seed);
        auto a = t.constant(randn({5, 7}, rng));
        auto b = t.constant(randn({7, 3}, rng));
        return softmax_last(matmul(a, b)).value().data;
    };
    EXPECT_EQ(run(42), run(42));
}

TEST(Tape, GradDisabledRecordsNoClosures) {
    Parameter<double> w("w", TD({2}, {1.0, 2.0}));
    Tape<double> t(0, false);
    auto v = t.param(w);
    EXPECT_FALSE(v.requires_grad());
    EXPECT_FALSE(square(v).requires_grad());
}

TEST(FiniteDiff, QuadraticIsExact) {
    Rng rng(33);
    Parameter<double> th("theta", randn({6}, rng));
    const TD Q = randn({6, 6}, rng);
    LossFn f = [&](Tape<double> &t) {
        auto x = reshape(t.param(th), Shape{6, 1});
        return sum(mul(x, matmul(t.constant(Q), x)));
    };
    const auto r = finite_diff_check(f, {&th}, {1e-5});
    EXPECT_LT(r.max_rel_error, 1e-8);
    EXPECT_EQ(r.checked, 6u);
}

TEST(FiniteDiff, NonFiniteLossIsNumericError) {
    Parameter<double> th("theta", TD({1}, {0.0}));
    LossFn f = [&](Tape<double> &t) {
        auto x = t.param(th);
        return sum(scale(exp(add_const(x, 1000.0)), 1e300));
    };
    EXPECT_THROW(finite_diff_check(f, {&th}), NumericError);
}

TEST(FiniteDiff, DetectsWrongGradient) {
    // x * relu-free path with a deliberately wrong custom op
    Parameter<double> th("theta", TD({1}, {1.5}));
    LossFn f = [&](Tape<double> &t) {
        auto x = t.param(th);
        auto out = x.value();
        out[0] = out[0] * out[0];
        return t.record(out, {x}, [x](Tape<double> &tp, const TD &g) { tp.grad_ptr(x.id)[0] += g[0]; });
    };
    EXPECT_GT(finite_diff_check(f, {&th}).max_rel_error, 0.1);
}

TEST(FiniteDiff, KinkCrossingsAreSkipped) {
    Parameter<double> th("theta", TD({2}, {1e-7, 1.0}));
    LossFn f = [&](Tape<double> &t) { return sum(relu(t.param(th))); };
    const auto r = finite_diff_check(f, {&th}, {1e-5});
    EXPECT_EQ(r.skipped_kinks, 1u);
    EXPECT_EQ(r.checked, 1u);
    EXPECT_LT(r.max_rel_error, 1e-10);
}
