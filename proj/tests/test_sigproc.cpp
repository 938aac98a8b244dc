// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "ndgait/sigproc/filters.hpp"
#include "ndgait/sigproc/preprocess.hpp"
#include "test_util.hpp"

using namespace ndg;
using namespace ndg::sigproc;
using ndg::testing::randn;

namespace {

constexpr double kPi = std::numbers::pi;

Array sine(std::size_t C, std::size_t T, double f, double fs, double phase = 0.0) {
    Array a({C, T});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t) a[c * T + t] = std::sin(2 * kPi * f * t / fs + phase);
    return a;
}

// Complex amplitude of frequency f over samples [lo, hi) of one row
// (single-bin DFT over an integer number of periods).
std::complex<double> tone(const Array &a, std::size_t row, std::size_t lo, std::size_t hi, double f, double fs) {
    const std::size_t T = a.dim(1);
    std::complex<double> acc = 0;
    for (std::size_t t = lo; t < hi; ++t)
        acc += a[row * T + t] * std::polar(1.0, -2 * kPi * f * t / fs);
    return acc * (2.0 / static_cast<double>(hi - lo));
}

} // namespace

TEST(Butterworth, MagnitudeMatchesReferenceDesign) {
    // |H(f)| of scipy.signal.butter(4, [0.1, 48], 'bandpass', fs=200, output='sos')
    const double f[] = {0.05, 0.1, 1, 10, 30, 48, 60, 90};
    const double ref[] = {6.20667727e-02, 7.07106781e-01, 9.99999999e-01, 9.99999796e-01,
                          9.96382577e-01, 7.07106781e-01, 2.11044191e-01, 4.86165380e-04};
    const Sos sos = butter_bandpass(4, 0.1, 48.0, 200.0);
    ASSERT_EQ(sos.size(), 4u);
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(sos_gain(sos, f[i], 200.0), ref[i], 1e-8 + 1e-7 * ref[i]) << f[i];
}

TEST(Bandpass, DcIsRemoved) {
    Array x({1, 4000}, 3.0);
    const Array y = bandpass(x, 200.0, {});
    double mx = 0;
    for (std::size_t t = 400; t < 3600; ++t) mx = std::max(mx, std::abs(y[t]));
    EXPECT_LT(mx, 0.05 * 3.0);
}

TEST(Bandpass, TenHertzPassesWithZeroPhase) {
    const Array x = sine(1, 6000, 10.0, 200.0, 0.3);
    const Array y = bandpass(x, 200.0, {});
    const auto ax = tone(x, 0, 2000, 4000, 10.0, 200.0);
    const auto ay = tone(y, 0, 2000, 4000, 10.0, 200.0);
    EXPECT_NEAR(std::abs(ay) / std::abs(ax), 1.0, 0.05);
    EXPECT_LT(std::abs(std::arg(ay / ax)), 1e-3);
}

TEST(Bandpass, NinetyHertzAtOneKilohertzIsAttenuated) {
    const Array x = sine(1, 5000, 90.0, 1000.0);
    const Array y = bandpass(x, 1000.0, {});
    const auto ay = tone(y, 0, 1000, 4000, 90.0, 1000.0);
    EXPECT_LT(std::abs(ay), 0.1);
}

TEST(Bandpass, ReversalSymmetryOffline) {
    Rng rng(44);
    const Array x = randn({3, 1500}, rng);
    Array xr = x;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t t = 0; t < 1500; ++t) xr[c * 1500 + t] = x[c * 1500 + 1499 - t];
    const Array y = bandpass(x, 200.0, {});
    const Array yr = bandpass(xr, 200.0, {});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t t = 0; t < 1500; ++t) EXPECT_NEAR(yr[c * 1500 + t], y[c * 1500 + 1499 - t], 1e-8);
}

TEST(Bandpass, ConfigAndInputErrors) {
    Array x({1, 1000});
    FilterSpec bad;
    bad.f_hi = 100.0;
    EXPECT_THROW(bandpass(x, 200.0, bad), ConfigError);
    bad.f_hi = 48.0;
    bad.f_lo = 60.0;
    EXPECT_THROW(bandpass(x, 200.0, bad), ConfigError);
    EXPECT_THROW(bandpass(Array({1, 20}), 200.0, {}), InputError);
}

TEST(Bandpass, StreamingModeIsCausal) {
    Rng rng(45);
    Array x = randn({2, 600}, rng);
    FilterSpec spec;
    spec.mode = FilterMode::StreamingCausal;
    const Array y1 = bandpass(x, 200.0, spec);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 300; t < 600; ++t) x[c * 600 + t] = rng.normal();
    const Array y2 = bandpass(x, 200.0, spec);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 300; ++t) EXPECT_EQ(y1[c * 600 + t], y2[c * 600 + t]);
}

TEST(Bandpass, StreamingClassMatchesBatchCausalFilter) {
    Rng rng(46);
    const Array x = randn({3, 500}, rng);
    FilterSpec spec;
    spec.mode = FilterMode::StreamingCausal;
    const Array ref = bandpass(x, 200.0, spec);
    StreamingBandpass sb(3, 200.0, spec);
    for (std::size_t t = 0; t < 500; ++t) {
        double s[3] = {x[t], x[500 + t], x[1000 + t]};
        sb.process(s);
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(s[c], ref[c * 500 + t], 1e-12);
    }
}

TEST(Bandpass, PrimedStreamHasNoStepTransient) {
    StreamingBandpass sb(1, 200.0, {});
    double first = 5.0;
    sb.prime(&first);
    for (int t = 0; t < 100; ++t) {
        double s = 5.0;
        sb.process(&s);
        EXPECT_LT(std::abs(s), 1e-9);
    }
}

TEST(Car, TwoChannels) {
    const Array y = common_average_reference(Array({2, 1}, std::vector<double>{1.0, 3.0}));
    EXPECT_EQ(y[0], -1.0);
    EXPECT_EQ(y[1], 1.0);
}

TEST(Car, IdenticalChannelsGiveZero) {
    Array x({4, 3}, std::vector<double>{1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3});
    for (double v : common_average_reference(x).data) EXPECT_EQ(v, 0.0);
}

TEST(Car, ColumnMeansVanishAndIdempotent) {
    Rng rng(47);
    for (int trial = 0; trial < 20; ++trial) {
        const Array x = randn({4, 8}, rng, 10.0);
        const Array y = common_average_reference(x);
        for (std::size_t t = 0; t < 8; ++t) {
            double m = 0;
            for (std::size_t c = 0; c < 4; ++c) m += y[c * 8 + t];
            EXPECT_LT(std::abs(m / 4), 1e-12);
        }
        const Array z = common_average_reference(y);
        for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(z[i], y[i], 1e-12);
    }
}

TEST(Car, SingleChannelIsInputError) { EXPECT_THROW(common_average_reference(Array({1, 5})), InputError); }

TEST(Resample, EqualRatesIsIdentity) {
    Rng rng(48);
    const Array x = randn({2, 37}, rng);
    EXPECT_EQ(resample(x, 200.0, 200.0).data, x.data);
}

TEST(Resample, LengthFormula) {
    EXPECT_EQ(resample(Array({1, 1000}), 500.0, 200.0).dim(1), 400u);
    EXPECT_EQ(resample(Array({1, 1001}), 1000.0, 200.0).dim(1), 200u);
    EXPECT_EQ(resample(Array({1, 7}), 100.0, 200.0).dim(1), 14u);
}

TEST(Resample, DominantBinPreserved) {
    const Array x = sine(1, 4000, 5.0, 400.0);
    const Array y = resample(x, 400.0, 200.0);
    ASSERT_EQ(y.dim(1), 2000u);
    // scan bins of a 1000-sample DFT at 200 Hz (0.2 Hz resolution)
    double best = -1;
    double best_f = 0;
    for (int k = 1; k < 500; ++k) {
        const double f = k * 0.2;
        const double m = std::abs(tone(y, 0, 500, 1500, f, 200.0));
        if (m > best) {
            best = m;
            best_f = f;
        }
    }
    EXPECT_NEAR(best_f, 5.0, 1e-9);
    EXPECT_NEAR(best, 1.0, 0.01);
}

TEST(Resample, AliasingToneIsSuppressed) {
    // 150 Hz at 400 Hz would fold to 50 Hz at 200 Hz without the anti-alias filter
    const Array x = sine(1, 4000, 150.0, 400.0);
    const Array y = resample(x, 400.0, 200.0);
    EXPECT_LT(std::abs(tone(y, 0, 500, 1500, 50.0, 200.0)), 0.01);
}

TEST(ZNorm, ConstantRow) {
    Array x({2, 5}, std::vector<double>{4, 4, 4, 4, 4, 1, 2, 3, 4, 5});
    const auto r = znorm_joints(x);
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(r.joints[t], 0.0);
    EXPECT_EQ(r.stats.stds[0], 0.0);
    EXPECT_EQ(r.stats.means[0], 4.0);
}

TEST(ZNorm, StandardRowUnchanged) {
    Array x({1, 4}, std::vector<double>{1, -1, 1, -1});
    const auto r = znorm_joints(x);
    for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(r.joints[t], x[t], 1e-10);
}

TEST(ZNorm, MomentsAndInverse) {
    Rng rng(49);
    for (int trial = 0; trial < 20; ++trial) {
        Array x = randn({3, 200}, rng, 30.0);
        for (auto &v : x.data) v += 17.0;
        const auto r = znorm_joints(x);
        for (std::size_t j = 0; j < 3; ++j) {
            double m = 0, v = 0;
            for (std::size_t t = 0; t < 200; ++t) m += r.joints[j * 200 + t];
            m /= 200;
            for (std::size_t t = 0; t < 200; ++t) v += std::pow(r.joints[j * 200 + t] - m, 2);
            EXPECT_LT(std::abs(m), 1e-10);
            EXPECT_LT(std::abs(std::sqrt(v / 200) - 1.0), 1e-10);
        }
        const Array back = inverse_znorm(r.joints, r.stats);
        for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-9);
    }
}
