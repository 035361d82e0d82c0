#include <cmath>

#include <benchmark/benchmark.h>

#include "seje/evalkit.hpp"
#include "seje/rng.hpp"

namespace {

seje::Matrix random_unit(seje::Rng& rng, std::size_t m, std::size_t d) {
  seje::Matrix out(m, std::vector<double>(d));
  for (auto& row : out) {
    double n = 0.0;
    for (double& x : row) {
      x = rng.normal();
      n += x * x;
    }
    for (double& x : row) x /= std::sqrt(n);
  }
  return out;
}

void BM_RankRetrieval(benchmark::State& state) {
  seje::Rng rng(1);
  const std::size_t m = state.range(0);
  const seje::Matrix q = random_unit(rng, m, 32), c = random_unit(rng, m, 32);
  for (auto _ : state) benchmark::DoNotOptimize(seje::rank_retrieval(q, c));
  state.SetComplexityN(static_cast<long>(m));
}
BENCHMARK(BM_RankRetrieval)->RangeMultiplier(2)->Range(128, 2048)->Complexity(benchmark::oNSquared);

void BM_Evaluate(benchmark::State& state) {
  seje::Rng rng(2);
  const seje::Matrix r = random_unit(rng, 1000, 32), v = random_unit(rng, 1000, 32);
  const std::vector<std::size_t> ks{1, 5, 10};
  for (auto _ : state) benchmark::DoNotOptimize(seje::evaluate(r, v, state.range(0), 10, ks, 1));
}
BENCHMARK(BM_Evaluate)->Arg(200)->Arg(1000);

}  // namespace
