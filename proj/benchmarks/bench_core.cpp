#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cocycle/ensembles.hpp"
#include "cocycle/limitstat.hpp"
#include "cocycle/matcore.hpp"
#include "cocycle/mclab.hpp"

using namespace cocycle;

namespace {

const SeedPath kSeed{7, experiment_id("bench"), 0};

std::vector<double> normal_sample(std::size_t m) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  std::vector<double> z(m);
  for (double& v : z) v = nd(gen);
  return z;
}

void BM_Svd2(benchmark::State& state) {
  const SquareMatrix g(Matrix{{2.0, 0.3}, {-0.7, 0.6}});
  for (auto _ : state) benchmark::DoNotOptimize(svd(g));
}
BENCHMARK(BM_Svd2);

void BM_SampleMatrix(benchmark::State& state) {
  const EnsembleSpec spec = make_rotation_spec(2.0);
  std::uint64_t j = 1;
  for (auto _ : state) benchmark::DoNotOptimize(sample_matrix(spec, j++, kSeed));
}
BENCHMARK(BM_SampleMatrix);

void BM_SimulateSteps(benchmark::State& state) {
  const EnsembleSpec spec = make_rotation_spec(2.0);
  const auto n = static_cast<std::uint64_t>(state.range(0));
  SimulateOptions o;
  o.workers = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(spec, Direction::basis(2, 0), {n}, 1000, kSeed, o));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * 1000);
}
BENCHMARK(BM_SimulateSteps)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Kolmogorov(benchmark::State& state) {
  const auto z = normal_sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(weighted_kolmogorov(z, 0.0));
}
BENCHMARK(BM_Kolmogorov)->Arg(1000)->Arg(100000)->Unit(benchmark::kMicrosecond);

void BM_LqDistance(benchmark::State& state) {
  const auto z = normal_sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(lq_distance(z, 1.0));
}
BENCHMARK(BM_LqDistance)->Arg(1000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_Wasserstein(benchmark::State& state) {
  const auto z = normal_sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein_p(z, 1.0));
}
BENCHMARK(BM_Wasserstein)->Arg(1000)->Arg(100000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
