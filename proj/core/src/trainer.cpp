#include "grids/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "grids/errors.hpp"

namespace grids {

namespace {

enum StreamId : std::uint64_t {
  kInitStream = 1,
  kTrainDataStream = 2,
  kTrainSamplingStream = 3,
  kEvalDataStream = 4,
  kEvalSamplingStream = 5,
};

double min_distance(const CoordinateSet& coords, Coord target) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : coords.points) {
    const double dx = static_cast<double>(p.x) - target.x;
    const double dy = static_cast<double>(p.y) - target.y;
    best = std::min(best, std::sqrt(dx * dx + dy * dy));
  }
  return best;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::grids: return "grids";
    case Strategy::nearest: return "nearest";
    case Strategy::random: return "random";
    case Strategy::topk: return "topk";
    case Strategy::dense: return "dense";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

ExperimentConfig ExperimentConfig::normalized() const {
  ExperimentConfig out = *this;
  out.sampler.num_tokens = train.num_tokens;
  out.policy.model_dim = task.channels;
  out.task.validate();
  out.sampler.validate();
  out.policy.validate();
  if (out.train.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (out.train.log_every == 0) throw ConfigError("train: log_every must be >= 1");
  if (out.train.num_tokens > out.task.height * out.task.width) {
    throw ConfigError("train: tokens exceeds height*width");
  }
  if (out.policy.out_dim != 2) throw ConfigError("policy: out_dim must be 2");
  return out;
}

ParameterStore init_model(const ExperimentConfig& cfg_in) {
  const auto cfg = cfg_in.normalized();
  Rng rng = Rng::stream(cfg.train.seed, kInitStream);
  ParameterStore params;
  init_sampler_params(params, cfg.task.channels, cfg.sampler, rng);
  init_policy_params(params, cfg.policy, rng);
  return params;
}

SamplerOutput sample_tokens(const ExperimentConfig& cfg, Strategy strategy, const FeatureGrid& grid,
                            const ParameterStore& params, Rng& sampling_rng) {
  switch (strategy) {
    case Strategy::grids: return grids_forward(grid, params, cfg.sampler);
    case Strategy::nearest: return sample_nearest(grid, params, cfg.sampler);
    case Strategy::random:
      return sample_random(grid, cfg.sampler.num_tokens, sampling_rng, params, cfg.sampler);
    case Strategy::topk: return sample_topk(grid, cfg.sampler.num_tokens, params, cfg.sampler);
    case Strategy::dense: return sample_dense(grid, params, cfg.sampler);
  }
  throw ConfigError("unhandled strategy");
}

namespace {

struct ForwardPass {
  SamplerOutput sampled;
  PolicyTape tape;
  SampleResult result;
};

ForwardPass forward_pass(const ExperimentConfig& cfg, Strategy strategy, const FeatureGrid& grid,
                         Coord target, const ParameterStore& params, Rng& sampling_rng) {
  ForwardPass f{sample_tokens(cfg, strategy, grid, params, sampling_rng), {}, {}};
  const auto& tokens = f.sampled.tokens;
  f.tape = attention_forward(tokens.tokens, tokens.count, params, cfg.policy);
  const auto head = head_and_loss(f.tape, params, cfg.policy, target);
  f.result.loss = head.loss;
  f.result.prediction = head.prediction;
  f.result.coord_dist = min_distance(tokens.coords, target);
  f.result.tokens = tokens.count;
  return f;
}

}  // namespace

SampleResult score_sample(const ExperimentConfig& cfg, Strategy strategy, const FeatureGrid& grid,
                          Coord target, const ParameterStore& params, Rng& sampling_rng) {
  return forward_pass(cfg, strategy, grid, target, params, sampling_rng).result;
}

SampleResult run_sample(const ExperimentConfig& cfg, Strategy strategy, const FeatureGrid& grid,
                        Coord target, ParameterStore& params, Rng& sampling_rng, float d_loss) {
  auto f = forward_pass(cfg, strategy, grid, target, params, sampling_rng);
  if (d_loss != 0.0f && std::isfinite(f.result.loss)) {
    const auto d_input = policy_backward(f.tape, d_loss, params, cfg.policy);
    const std::size_t d = cfg.policy.model_dim;
    std::span<const float> upstream(d_input.data.data() + d, f.sampled.tokens.count * d);
    grids_backward(f.sampled.tape, upstream, params);
  }
  return f.result;
}

EvalResult evaluate(const ExperimentConfig& cfg_in, const ParameterStore& params) {
  const auto cfg = cfg_in.normalized();
  EvalResult out;
  if (cfg.train.eval_samples == 0) return out;
  const HotspotTask task(cfg.task, cfg.train.seed);
  Rng data = Rng::stream(cfg.train.seed, kEvalDataStream);
  Rng sampling = Rng::stream(cfg.train.seed, kEvalSamplingStream);
  double loss = 0.0;
  double dist = 0.0;
  for (std::size_t n = 0; n < cfg.train.eval_samples; ++n) {
    const auto batch = task.sample(data);
    const auto r = score_sample(cfg, cfg.train.strategy, batch.grid, batch.target, params, sampling);
    loss += r.loss;
    dist += r.coord_dist;
  }
  out.samples = cfg.train.eval_samples;
  out.loss = loss / static_cast<double>(out.samples);
  out.coord_dist = dist / static_cast<double>(out.samples);
  return out;
}

RunLog train(const ExperimentConfig& cfg_in, ParameterStore& params) {
  const auto cfg = cfg_in.normalized();
  const auto t0 = std::chrono::steady_clock::now();
  RunLog log;
  const auto& tc = cfg.train;
  if (tc.steps == 0) return log;

  log.initial = evaluate(cfg, params);
  const HotspotTask task(cfg.task, tc.seed);
  Rng data = Rng::stream(tc.seed, kTrainDataStream);
  Rng sampling = Rng::stream(tc.seed, kTrainSamplingStream);
  AdamOptimizer adam(params, AdamConfig{tc.learning_rate, tc.adam_beta1, tc.adam_beta2, tc.adam_eps});
  const float d_loss = 1.0f / static_cast<float>(tc.batch_size);

  log.step_loss.reserve(tc.steps);
  for (std::size_t step = 0; step < tc.steps; ++step) {
    params.zero_grads();
    double loss = 0.0;
    double dist = 0.0;
    std::size_t tokens = 0;
    for (std::size_t b = 0; b < tc.batch_size; ++b) {
      const auto batch = task.sample(data);
      const auto r = run_sample(cfg, tc.strategy, batch.grid, batch.target, params, sampling, d_loss);
      if (!std::isfinite(r.loss)) throw DivergenceError(step, "non-finite loss");
      loss += r.loss;
      dist += r.coord_dist;
      tokens = r.tokens;
    }
    loss /= static_cast<double>(tc.batch_size);
    dist /= static_cast<double>(tc.batch_size);
    log.step_loss.push_back(loss);
    if (step % tc.log_every == 0 || step + 1 == tc.steps) {
      log.rows.push_back(LogRow{step, loss, dist, tokens, tc.strategy});
    }
    try {
      adam.step(params);
    } catch (const NumericError& e) {
      throw DivergenceError(step, e.what());
    }
  }
  log.final = evaluate(cfg, params);
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

TrainResult train_experiment(const ExperimentConfig& cfg) {
  TrainResult r{init_model(cfg), {}};
  r.log = train(cfg, r.params);
  return r;
}

std::string run_log_csv(const RunLog& log) {
  std::string out = "step,loss,coord_dist,tokens,strategy\n";
  char buf[160];
  for (const auto& row : log.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%zu,%s\n", row.step, row.loss, row.coord_dist,
                  row.tokens, std::string(to_string(row.strategy)).c_str());
    out += buf;
  }
  return out;
}

}  // namespace grids
