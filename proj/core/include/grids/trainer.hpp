#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "grids/optimizer.hpp"
#include "grids/parameter_store.hpp"
#include "grids/policy.hpp"
#include "grids/sampler.hpp"
#include "grids/task.hpp"

namespace grids {

enum class Strategy { grids, nearest, random, topk, dense };

std::string_view to_string(Strategy s);
// Throws ConfigError for unknown names.
Strategy parse_strategy(std::string_view name);
inline constexpr Strategy kAllStrategies[] = {Strategy::grids, Strategy::nearest,
                                              Strategy::random, Strategy::topk, Strategy::dense};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  float learning_rate = 3e-4f;
  float adam_beta1 = 0.9f;
  float adam_beta2 = 0.999f;
  float adam_eps = 1e-8f;
  std::uint64_t seed = 42;
  Strategy strategy = Strategy::grids;
  std::size_t num_tokens = 4;  // K
  std::size_t log_every = 100;
  std::size_t eval_samples = 256;  // held-out grids scored before and after training
};

/// Everything that determines a run.
struct ExperimentConfig {
  TrainConfig train;
  HotspotTaskConfig task;
  SamplerConfig sampler;  // num_tokens is taken from train.num_tokens
  PolicyConfig policy;    // model_dim is taken from task.channels

  // Copy with the derived fields filled in; throws ConfigError when invalid.
  ExperimentConfig normalized() const;
};

struct LogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double coord_dist = 0.0;
  std::size_t tokens = 0;
  Strategy strategy = Strategy::grids;
};

struct EvalResult {
  double loss = 0.0;        // mean MSE
  double coord_dist = 0.0;  // mean over grids of min_k |p_k - target|
  std::size_t samples = 0;
};

struct RunLog {
  std::vector<LogRow> rows;
  std::vector<double> step_loss;  // batch-mean loss at every step
  EvalResult initial;
  EvalResult final;
  double wall_seconds = 0.0;
};

// Builds and initialises all sampler, encoder and policy parameters.
ParameterStore init_model(const ExperimentConfig& cfg);

struct SampleResult {
  double loss = 0.0;
  double coord_dist = 0.0;
  std::size_t tokens = 0;
  std::vector<float> prediction;
};

// One grid through sampler and policy. `sampling_rng` is only used by the
// random strategy.
SampleResult score_sample(const ExperimentConfig& cfg, Strategy strategy, const FeatureGrid& grid,
                          Coord target, const ParameterStore& params, Rng& sampling_rng);

// As score_sample, and accumulates the gradients of d_loss * loss into params.
SampleResult run_sample(const ExperimentConfig& cfg, Strategy strategy, const FeatureGrid& grid,
                        Coord target, ParameterStore& params, Rng& sampling_rng, float d_loss);

// Sampler front end for a strategy.
SamplerOutput sample_tokens(const ExperimentConfig& cfg, Strategy strategy, const FeatureGrid& grid,
                            const ParameterStore& params, Rng& sampling_rng);

// Held-out score; the eval stream depends only on the seed, not the strategy.
EvalResult evaluate(const ExperimentConfig& cfg, const ParameterStore& params);

// Trains params in place. Throws DivergenceError on a non-finite loss.
RunLog train(const ExperimentConfig& cfg, ParameterStore& params);

struct TrainResult {
  ParameterStore params;
  RunLog log;
};

TrainResult train_experiment(const ExperimentConfig& cfg);

// "step,loss,coord_dist,tokens,strategy" plus one row per logged step.
std::string run_log_csv(const RunLog& log);

}  // namespace grids
