#include <benchmark/benchmark.h>

#include "silofl/learner/dataset.hpp"
#include "silofl/learner/model.hpp"

namespace {

using namespace silofl;
using namespace silofl::learner;

prg::Seed bench_seed() {
  prg::Seed s{};
  s[0] = 0xdf;
  return s;
}

// The 2x536-unit fully connected model on 784 inputs (the paper-scale
// timing configuration); accuracy is not the point here.
void BM_Model1mGradients(benchmark::State& state) {
  const std::size_t features = 784;
  ModelConfig config;
  config.kind = ModelKind::kMlp;
  config.hidden = {536, 536};
  config.input_dim = features;
  Model model(config);
  model.init_params(bench_seed());

  const auto data = make_synthetic(32, features, 4.0, bench_seed());
  std::vector<std::size_t> indices(data.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

  for (auto _ : state) {
    benchmark::DoNotOptimize(per_example_clipped_grads(
        model, data.features, data.feature_dim, data.labels, indices, 1.0));
  }
  state.SetItemsProcessed(state.iterations() * data.size());
  state.counters["params"] =
      benchmark::Counter(static_cast<double>(model.param_count()));
}
BENCHMARK(BM_Model1mGradients)->Unit(benchmark::kMillisecond);

}  // namespace
