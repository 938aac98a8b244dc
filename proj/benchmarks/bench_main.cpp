// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>

#include <benchmark/benchmark.h>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "ndgait/data/synth.hpp"
#include "ndgait/fusion/fusion.hpp"
#include "ndgait/objectives/stage1.hpp"
#include "ndgait/pipeline/stream.hpp"
#include "ndgait/pipeline/train.hpp"
#include "ndgait/sigproc/filters.hpp"

using namespace ndg;
using pipeline::Real;

namespace {

diff::Tensor<Real> randn(std::vector<std::size_t> shape, std::uint64_t seed) {
    diff::Tensor<Real> t(std::move(shape));
    Rng rng(seed);
    for (auto &v : t.data) v = static_cast<Real>(rng.normal());
    return t;
}

void BM_EncoderForward(benchmark::State &st) {
    pipeline::RunConfig c;
    auto m = pipeline::init_model(c);
    const auto x = randn({static_cast<std::size_t>(st.range(0)), c.net.channels, c.net.window}, 1);
    for (auto _ : st) {
        diff::Tape<Real> tape(0, false);
        auto z = m.s1.eeg.forward(tape, tape.constant(x));
        benchmark::DoNotOptimize(z.value().data.data());
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Stage1Step(benchmark::State &st) {
    pipeline::RunConfig c;
    auto m = pipeline::init_model(c);
    const std::size_t B = static_cast<std::size_t>(st.range(0));
    const auto eeg = randn({B, c.net.channels, c.net.window}, 2);
    const auto mot = randn({B, c.net.joints, c.net.window}, 3);
    for (auto _ : st) {
        diff::Tape<Real> tape(0, true);
        auto l = objectives::stage1_total(tape, m.s1, eeg, mot);
        tape.backward(l.total);
        benchmark::DoNotOptimize(l.rec);
    }
}
BENCHMARK(BM_Stage1Step)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_InferencePredict(benchmark::State &st) {
    pipeline::RunConfig c;
    auto m = pipeline::init_model(c);
    Rng rng(4);
    std::vector<std::string> names;
    for (long k = 0; k < st.range(0); ++k) names.push_back("s" + std::to_string(k));
    pipeline::init_heads(m, names, rng);
    const auto z = randn({1, c.net.latent}, 5);
    for (auto _ : st) {
        auto p = fusion::inference_predict(z, m.heads, m.scorer);
        benchmark::DoNotOptimize(p.yhat.data.data());
    }
}
BENCHMARK(BM_InferencePredict)->Arg(9)->Arg(49)->Unit(benchmark::kMicrosecond);

void BM_StreamSession(benchmark::State &st) {
    pipeline::RunConfig c;
    auto m = pipeline::init_model(c);
    data::SynthConfig sc;
    sc.channels = c.net.channels;
    sc.sessions = 3;
    sc.duration_s = 4;
    const auto raw = data::generate_synthetic_subject(6, sc);
    std::vector<std::string> names{raw[1].key(), raw[2].key()};
    Rng rng(7);
    pipeline::init_heads(m, names, rng);
    for (auto _ : st) {
        auto r = pipeline::stream_infer(m, raw[0]);
        st.counters["mean_ms"] = r.latency.mean();
        st.counters["p95_ms"] = r.latency.p95();
    }
}
BENCHMARK(BM_StreamSession)->Unit(benchmark::kMillisecond);

} // namespace

int main(int argc, char **argv) {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 64 << 20);
#endif
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
