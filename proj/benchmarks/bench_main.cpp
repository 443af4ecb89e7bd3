#include <benchmark/benchmark.h>

#include "grids/policy.hpp"
#include "grids/rng.hpp"
#include "grids/sampler.hpp"

using namespace grids;

namespace {

FeatureGrid random_grid(std::size_t h, std::size_t w, std::size_t c) {
  Rng rng(1);
  std::vector<float> v(h * w * c);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return {h, w, c, std::move(v)};
}

void BM_BilinearSample(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto grid = random_grid(16, 16, c);
  const auto s = bilinear_stencil(7.3f, 4.6f, 16, 16);
  for (auto _ : state) benchmark::DoNotOptimize(bilinear_sample(grid, s));
}
BENCHMARK(BM_BilinearSample)->Arg(32)->Arg(256)->Arg(2048);

void BM_GridsForward(benchmark::State& state) {
  SamplerConfig cfg;
  cfg.num_tokens = static_cast<std::size_t>(state.range(0));
  const auto grid = random_grid(16, 16, 32);
  ParameterStore params;
  Rng rng(2);
  init_sampler_params(params, 32, cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(grids_forward(grid, params, cfg));
}
BENCHMARK(BM_GridsForward)->Arg(4)->Arg(16)->Arg(64);

// Attention cost against the number of tokens; dense 16x16 is N = 256.
void BM_PolicyForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  PolicyConfig cfg;
  cfg.model_dim = 32;
  ParameterStore params;
  Rng rng(3);
  init_policy_params(params, cfg, rng);
  std::vector<float> tokens(n * 32);
  for (float& v : tokens) v = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(attention_forward(tokens, n, params, cfg));
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_PolicyForward)->RangeMultiplier(4)->Range(4, 256)->Complexity();

}  // namespace
BENCHMARK_MAIN();
