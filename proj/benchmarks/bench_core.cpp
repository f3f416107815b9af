#include <benchmark/benchmark.h>

#include "epsel/ensembles.hpp"
#include "epsel/ep_core.hpp"
#include "epsel/priors.hpp"
#include "epsel/random.hpp"
#include "epsel/state_evolution.hpp"

using namespace epsel;

static void BM_HaarSample(benchmark::State& state) {
  const Index n = state.range(0);
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(sample_haar_unitary(n, Seed{seed++}));
}
BENCHMARK(BM_HaarSample)->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

static void BM_HaarApply(benchmark::State& state) {
  const Index n = state.range(0);
  const auto q = sample_haar_unitary(n, Seed{1});
  Rng rng = make_rng(Seed{2}, Stream::monte_carlo);
  const CVector x = complex_normal_vector(rng, n, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(q.apply(x));
}
BENCHMARK(BM_HaarApply)->Arg(1024)->Arg(4096)->Unit(benchmark::kMicrosecond);

static void BM_Mmse(benchmark::State& state) {
  const auto prior = PriorSpec::bernoulli_gaussian(0.1);
  double v = 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mmse(prior, v));
    v = v < 1e3 ? v * 1.7 : 1e-3;
  }
}
BENCHMARK(BM_Mmse);

static void BM_RunEp(benchmark::State& state) {
  const Index n = state.range(0);
  const auto prior = PriorSpec::bernoulli_gaussian(0.1);
  const auto model = build_measurement(EnsembleSpec::row_orthogonal(), n / 2, n, 0.01, Seed{1});
  const CVector x = sample_signal(prior, n, Seed{1});
  Rng rng = make_rng(Seed{1}, Stream::noise);
  const CVector y = model.apply(x) + complex_normal_vector(rng, n / 2, 0.01);
  EpOptions opts;
  opts.early_stop_tol = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(run_ep(model, prior, y, x, 10, opts));
}
BENCHMARK(BM_RunEp)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

static void BM_SeFixedPoints(benchmark::State& state) {
  const auto prior = PriorSpec::bernoulli_gaussian(0.1);
  const auto spectrum = SpectralDensity::point_mass(1.0 / 0.15, 0.15);
  for (auto _ : state) benchmark::DoNotOptimize(se_fixed_points(prior, spectrum, 1e-6));
}
BENCHMARK(BM_SeFixedPoints)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
