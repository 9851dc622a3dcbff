#include <benchmark/benchmark.h>

#include "m3/common/rng.hpp"
#include "m3/geom/sim3.hpp"

namespace {

m3::Vec7 sample_tangent(m3::RngStream& rng) {
  m3::Vec7 tau;
  for (int i = 0; i < 7; ++i) tau(i) = rng.uniform(-0.5, 0.5);
  return tau;
}

void BM_Sim3Exp(benchmark::State& state) {
  m3::RngStream rng(42);
  const m3::Vec7 tau = sample_tangent(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(m3::Sim3Pose::exp(tau));
  }
}
BENCHMARK(BM_Sim3Exp);

void BM_Sim3Log(benchmark::State& state) {
  m3::RngStream rng(42);
  const m3::Sim3Pose pose = m3::Sim3Pose::exp(sample_tangent(rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pose.log());
  }
}
BENCHMARK(BM_Sim3Log);

void BM_Sim3Compose(benchmark::State& state) {
  m3::RngStream rng(42);
  const m3::Sim3Pose a = m3::Sim3Pose::exp(sample_tangent(rng));
  const m3::Sim3Pose b = m3::Sim3Pose::exp(sample_tangent(rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(a * b);
  }
}
BENCHMARK(BM_Sim3Compose);

}  // namespace

BENCHMARK_MAIN();
