#include <benchmark/benchmark.h>

#include <random>

#include "speechrt/pipeline.hpp"
#include "speechrt/speaker.hpp"

using namespace speechrt;

namespace {

const Pipeline& pipeline() {
  static const Pipeline p{RuntimeConfig{}};
  return p;
}

void backbone_step(benchmark::State& state) {
  const auto& p = pipeline();
  const auto prefix = p.synthetic_reference(1, static_cast<std::size_t>(state.range(0)), 2);
  const KvCache cache = p.backbone().prefill(prefix);
  const std::vector<double> x = p.backbone().embed_item(CoarseCode{7});
  for (auto _ : state) {
    state.PauseTiming();
    KvCache c = cache;
    state.ResumeTiming();
    benchmark::DoNotOptimize(p.backbone().step(c, x));
  }
}
BENCHMARK(backbone_step)->Arg(16)->Arg(256)->Arg(1024);

void refine_frame(benchmark::State& state) {
  const auto& p = pipeline();
  std::mt19937_64 rng(3);
  RefineInput in{17, std::vector<double>(p.config().backbone.width)};
  for (double& v : in.backbone_hidden) v = std::normal_distribution<double>(0.0, 1.0)(rng);
  const SamplerConfig sampler{state.range(0) ? 0.8 : 0.0, 0, 5};
  for (auto _ : state) benchmark::DoNotOptimize(p.refiner().refine_frame(in, sampler));
}
BENCHMARK(refine_frame)->Arg(0)->Arg(1);

void synthesize_group(benchmark::State& state) {
  const auto& p = pipeline();
  std::mt19937_64 rng(4);
  const Matrix features = random_normal(static_cast<std::size_t>(state.range(0)), p.codec().dim(), 0.5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(p.codec().synthesize(features));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(synthesize_group)->Arg(1)->Arg(4)->Arg(64);

void rvq_encode(benchmark::State& state) {
  const auto& p = pipeline();
  std::mt19937_64 rng(5);
  const Matrix features = random_normal(64, p.codec().dim(), 0.5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(p.codec().encode(features, static_cast<std::size_t>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(rvq_encode)->Arg(1)->Arg(8);

void speaker_embedding(benchmark::State& state) {
  std::mt19937_64 rng(6);
  Waveform w{std::vector<double>(24000 * 3), 24000};
  for (double& s : w.samples) s = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  for (auto _ : state) benchmark::DoNotOptimize(extract_speaker_embedding(w));
}
BENCHMARK(speaker_embedding);

}  // namespace
BENCHMARK_MAIN();
