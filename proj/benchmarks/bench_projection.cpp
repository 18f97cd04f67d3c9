#include <benchmark/benchmark.h>
#include <cmath>

#include "silofl/projection.hpp"

namespace {

using namespace silofl;

prg::Seed bench_seed() {
  prg::Seed s{};
  s[0] = 0xcf;
  return s;
}

void BM_GenerateProjection(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto spec = projection::make_spec(d, k, bench_seed(), 1.0, 1e-6);
  std::uint64_t round = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(projection::generate_projection(spec, round++));
  }
  state.SetItemsProcessed(state.iterations() * d * k);
}
BENCHMARK(BM_GenerateProjection)->Args({10000, 100})->Args({10000, 400});

void BM_ProjectAndReconstruct(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto spec = projection::make_spec(d, k, bench_seed(), 1.0, 1e-6);
  const auto p = projection::generate_projection(spec, 0);
  std::vector<std::vector<double>> grads(8, std::vector<double>(d, 0.0));
  for (std::size_t g = 0; g < grads.size(); ++g) {
    for (std::size_t i = 0; i < d; ++i) {
      grads[g][i] = 1.0 / std::sqrt(static_cast<double>(d)) *
                    ((i + g) % 2 == 0 ? 1.0 : -1.0) * 0.9;
    }
  }
  for (auto _ : state) {
    const auto z = projection::project_and_sum(grads, p, 1.0);
    benchmark::DoNotOptimize(projection::reconstruct(z, p));
  }
  state.SetItemsProcessed(state.iterations() * d * k * 2);
}
BENCHMARK(BM_ProjectAndReconstruct)->Args({10000, 400});

}  // namespace
