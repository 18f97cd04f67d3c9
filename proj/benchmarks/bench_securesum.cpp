#include <benchmark/benchmark.h>

#include "silofl/securesum.hpp"

namespace {

using namespace silofl;

prg::Seed bench_seed() {
  prg::Seed s{};
  s[0] = 0xbe;
  return s;
}

void BM_PairwiseMaskDerivation(benchmark::State& state) {
  const auto peers = static_cast<int>(state.range(0));
  const auto length = static_cast<std::size_t>(state.range(1));
  const FixedPointCodec codec{};
  std::vector<int> ids;
  for (int i = 0; i <= peers; ++i) ids.push_back(i);
  const auto keyring = securesum::make_keyring(bench_seed(), 0, ids);
  std::uint64_t counter = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        securesum::derive_pairwise_masks(keyring, counter++, length, codec));
  }
  state.SetItemsProcessed(state.iterations() * peers * length);
}
BENCHMARK(BM_PairwiseMaskDerivation)
    ->Args({3, 10000})
    ->Args({9, 10000})
    ->Args({19, 10000});

void BM_DcaShareGeneration(benchmark::State& state) {
  const auto nodes = static_cast<int>(state.range(0));
  const auto length = static_cast<std::size_t>(state.range(1));
  const FixedPointCodec codec{};
  const std::vector<double> xs(length, 0.5);
  const auto y = encode(xs, codec);
  prg::DeterministicRng rng(bench_seed(), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(securesum::dca_make_shares(y, nodes, rng));
  }
  state.SetItemsProcessed(state.iterations() * nodes * length);
}
BENCHMARK(BM_DcaShareGeneration)
    ->Args({2, 10000})
    ->Args({5, 10000})
    ->Args({10, 10000});

}  // namespace
