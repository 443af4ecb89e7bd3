#include <doctest.h>

#include <cmath>

#include "grids/config_text.hpp"
#include "grids/errors.hpp"
#include "grids/optimizer.hpp"
#include "grids/task.hpp"
#include "grids/trainer.hpp"
#include "test_util.hpp"

using namespace grids;

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

HotspotTaskConfig quiet_task(std::size_t side) {
  HotspotTaskConfig cfg;
  cfg.height = side;
  cfg.width = side;
  cfg.noise_std = 0.0f;
  return cfg;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg;
  cfg.task.height = 6;
  cfg.task.width = 6;
  cfg.task.channels = 8;
  cfg.train.steps = 30;
  cfg.train.batch_size = 2;
  cfg.train.log_every = 10;
  cfg.train.eval_samples = 8;
  return cfg;
}

}  // namespace

TEST_CASE("hotspot task basis") {
  const HotspotTask task(HotspotTaskConfig{}, 42);
  CHECK(std::abs(dot(task.signal_dir(), task.signal_dir()) - 1.0) <= 1e-6);
  CHECK(std::abs(dot(task.signal_dir(), task.position_axis_x())) <= 1e-6);
  CHECK(std::abs(dot(task.signal_dir(), task.background_pattern(0))) <= 1e-6);
  CHECK(std::abs(dot(task.background_pattern(0), task.background_pattern(1))) <= 1e-6);
  CHECK_THROWS_AS(task.background_pattern(2), IndexError);

  Rng rng(1);
  for (int n = 0; n < 200; ++n) {
    const auto b = gen_task(task, rng);
    CHECK(b.target.x >= 0.1f);
    CHECK(b.target.x <= 0.9f);
    CHECK(b.target.y >= 0.1f);
    CHECK(b.target.y <= 0.9f);
  }
}

TEST_CASE("gen_task: on-grid target") {
  // 17 x 17 makes the align-corners map exact: (0.25, 0.5) -> column 4, row 8.
  const auto cfg = quiet_task(17);
  auto blank_cfg = cfg;
  blank_cfg.signal_amp = 0.0f;
  blank_cfg.position_gain = 0.0f;
  const HotspotTask task(cfg, 5), blank(blank_cfg, 5);
  Rng a(9), b(9);
  const auto with = task.sample_at(a, {0.25f, 0.5f});
  const auto without = blank.sample_at(b, {0.25f, 0.5f});
  for (std::size_t i = 0; i < 17; ++i) {
    for (std::size_t j = 0; j < 17; ++j) {
      const double proj = dot(task.signal_dir(), with.grid.at(i, j));
      if (i == 8 && j == 4) {
        CHECK(proj == doctest::Approx(1.0).epsilon(1e-6));
      } else {
        CHECK(std::abs(proj) <= 1e-6);
        CHECK(test::to_vec(with.grid.at(i, j)) == test::to_vec(without.grid.at(i, j)));
      }
    }
  }
}

TEST_CASE("gen_task: cell-centre target splits the signal evenly") {
  const HotspotTask task(quiet_task(17), 6);
  Rng rng(2);
  const auto b = task.sample_at(rng, {4.5f / 16.0f, 8.5f / 16.0f});
  for (auto [i, j] : {std::pair{8, 4}, {8, 5}, {9, 4}, {9, 5}}) {
    CHECK(dot(task.signal_dir(), b.grid.at(i, j)) == doctest::Approx(0.25).epsilon(1e-5));
  }
  CHECK(std::abs(dot(task.signal_dir(), b.grid.at(7, 4))) <= 1e-6);
}

TEST_CASE("gen_task: reading back at the target recovers sum of squared weights") {
  // Brute-force oracle for the smallest recoverable fraction over the unit cell.
  double min_sq = 1.0;
  for (int a = 0; a <= 100; ++a) {
    for (int b = 0; b <= 100; ++b) {
      const double dx = a / 100.0, dy = b / 100.0;
      const double w[4] = {(1 - dx) * (1 - dy), dx * (1 - dy), (1 - dx) * dy, dx * dy};
      double s = 0.0;
      for (double v : w) s += v * v;
      min_sq = std::min(min_sq, s);
    }
  }
  CHECK(min_sq == doctest::Approx(0.25).epsilon(1e-12));

  auto cfg = quiet_task(16);
  cfg.signal_amp = 2.0f;
  const HotspotTask task(cfg, 7);
  Rng rng(3);
  for (int n = 0; n < 300; ++n) {
    const auto b = gen_task(task, rng);
    const auto p = map_to_grid(b.target, 16, 16, 1e-4f);
    const auto s = bilinear_stencil(p.x, p.y, 16, 16);
    double sq = 0.0;
    for (float w : s.weights) sq += static_cast<double>(w) * w;
    const double recovered = dot(task.signal_dir(), bilinear_sample(b.grid, s));
    CHECK(recovered == doctest::Approx(sq * cfg.signal_amp).epsilon(1e-4));
    CHECK(recovered >= 0.25 * cfg.signal_amp - 1e-5);
  }
}

TEST_CASE("Adam") {
  SUBCASE("zero gradients leave parameters unchanged") {
    ParameterStore store;
    store.add("w", {3}, 0.5f);
    AdamOptimizer opt(store, {});
    for (int t = 0; t < 5; ++t) opt.step(store);
    for (float v : store.get("w").values) CHECK(v == 0.5f);
  }
  SUBCASE("constant gradient follows the closed-form trajectory") {
    // With g constant, m_hat = g and v_hat = g^2 exactly, so each step moves by
    // lr * g / (|g| + eps).
    for (float g : {0.3f, -2.0f, 1e-3f}) {
      ParameterStore store;
      store.add("w", {1}, 1.0f);
      AdamConfig cfg;
      cfg.learning_rate = 1e-2f;
      AdamOptimizer opt(store, cfg);
      double expect = 1.0;
      for (int t = 1; t <= 50; ++t) {
        store.get("w").grads[0] = g;
        opt.step(store);
        const double m = g * (1.0 - std::pow(0.9f, t)) / (1.0 - std::pow(0.9f, t));
        const double v = static_cast<double>(g) * g * (1.0 - std::pow(0.999f, t)) /
                         (1.0 - std::pow(0.999f, t));
        expect -= 1e-2f * m / (std::sqrt(v) + 1e-8f);
        CHECK(store.get("w").values[0] == doctest::Approx(expect).epsilon(1e-5));
      }
      CHECK(store.get("w").values[0] ==
            doctest::Approx(1.0 - 50 * 1e-2 * g / (std::abs(g) + 1e-8)).epsilon(1e-5));
    }
  }
  SUBCASE("a non-finite gradient aborts without touching any parameter") {
    ParameterStore store;
    store.add("a", {2}, 1.0f);
    store.add("b", {2}, 1.0f);
    AdamOptimizer opt(store, {});
    store.get("a").grads = {0.1f, 0.1f};
    store.get("b").grads = {0.1f, NAN};
    CHECK_THROWS_WITH_AS(opt.step(store), doctest::Contains("'b'"), NumericError);
    CHECK(store.get("a").values == std::vector<float>{1.0f, 1.0f});
    CHECK(opt.steps_taken() == 0);
  }
}

TEST_CASE("train") {
  SUBCASE("zero steps") {
    auto cfg = tiny_experiment();
    cfg.train.steps = 0;
    auto params = init_model(cfg);
    const auto before = params;
    const auto log = train(cfg, params);
    CHECK(log.rows.empty());
    CHECK(log.step_loss.empty());
    auto it = before.begin();
    for (const auto& p : params) CHECK(p.values == (it++)->values);
    CHECK(run_log_csv(log) == "step,loss,coord_dist,tokens,strategy\n");
  }
  SUBCASE("same seed, bit-identical parameters after 100 steps") {
    auto cfg = tiny_experiment();
    cfg.train.steps = 100;
    cfg.train.learning_rate = 1e-3f;
    const auto a = train_experiment(cfg);
    const auto b = train_experiment(cfg);
    CHECK(a.log.step_loss == b.log.step_loss);
    CHECK(run_log_csv(a.log) == run_log_csv(b.log));
    auto it = b.params.begin();
    for (const auto& p : a.params) CHECK(p.values == (it++)->values);
  }
  SUBCASE("logs every log_every steps and at the last step") {
    const auto r = train_experiment(tiny_experiment());
    REQUIRE(r.log.rows.size() == 4);
    CHECK(r.log.rows[0].step == 0);
    CHECK(r.log.rows[1].step == 10);
    CHECK(r.log.rows[3].step == 29);
    CHECK(r.log.rows[0].tokens == 4);
    CHECK(r.log.step_loss.size() == 30);
  }
  SUBCASE("a NaN loss aborts with the step index") {
    auto cfg = tiny_experiment();
    auto params = init_model(cfg);
    params.get(names::kHeadB).values[0] = NAN;
    try {
      train(cfg, params);
      FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
      CHECK(e.step() == 0);
    }
  }
  SUBCASE("dense strategy feeds every patch") {
    auto cfg = tiny_experiment();
    cfg.train.strategy = Strategy::dense;
    cfg.train.steps = 3;
    const auto r = train_experiment(cfg);
    CHECK(r.log.rows.back().tokens == 36);
  }
}

TEST_CASE("nearest strategy: no gradient reaches the predictor from the feature path") {
  auto cfg = tiny_experiment().normalized();
  auto params = init_model(cfg);
  const HotspotTask task(cfg.task, cfg.train.seed);
  Rng data(1), sampling(2);
  for (int n = 0; n < 5; ++n) {
    const auto b = task.sample(data);
    params.zero_grads();
    run_sample(cfg, Strategy::nearest, b.grid, b.target, params, sampling, 1.0f);
    for (auto name : {names::kPredictorW1, names::kPredictorB1, names::kPredictorW2,
                      names::kPredictorB2}) {
      for (float g : params.get(name).grads) REQUIRE(g == 0.0f);
    }
    params.zero_grads();
    run_sample(cfg, Strategy::grids, b.grid, b.target, params, sampling, 1.0f);
    double b2 = 0.0;
    for (float g : params.get(names::kPredictorB2).grads) b2 += std::abs(g);
    CHECK(b2 > 0.0);
  }
}

TEST_CASE("strategy names") {
  for (auto s : kAllStrategies) CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("bilinear"), ConfigError);
}

TEST_CASE("config text") {
  SUBCASE("parses keys, comments and blank lines") {
    const auto spec = parse_run_config(
        "# toy run\n\nsteps = 12\nlearning_rate = 0.001  # inline\nstrategy = topk\n"
        "tokens = 9\nstrategies = grids, random\n");
    CHECK(spec.experiment.train.steps == 12);
    CHECK(spec.experiment.train.learning_rate == 0.001f);
    CHECK(spec.experiment.train.strategy == Strategy::topk);
    CHECK(spec.experiment.train.num_tokens == 9);
    CHECK(spec.strategies == std::vector<Strategy>{Strategy::grids, Strategy::random});
  }
  SUBCASE("unknown keys report the line and the key") {
    try {
      parse_run_config("steps = 1\n\nstepz = 2\n");
      FAIL("expected ConfigParseError");
    } catch (const ConfigParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("stepz") != std::string::npos);
    }
  }
  SUBCASE("bad values, duplicates and missing '='") {
    CHECK_THROWS_AS(parse_run_config("steps = ten\n"), ConfigParseError);
    CHECK_THROWS_AS(parse_run_config("steps = -1\n"), ConfigParseError);
    CHECK_THROWS_AS(parse_run_config("steps = 1\nsteps = 2\n"), ConfigParseError);
    CHECK_THROWS_AS(parse_run_config("steps 1\n"), ConfigParseError);
    CHECK_THROWS_AS(parse_run_config("strategy = best\n"), ConfigParseError);
  }
  SUBCASE("canonical text round-trips") {
    RunSpec spec;
    spec.experiment.train.seed = 77;
    spec.experiment.train.learning_rate = 0.0123f;
    spec.experiment.task.noise_std = 0.25f;
    spec.strategies = {Strategy::dense, Strategy::nearest};
    const auto text = format_run_config(spec);
    CHECK(format_run_config(parse_run_config(text)) == text);
    CHECK(config_digest(spec.experiment) == fnv1a64(format_experiment_config(spec.experiment)));
  }
  SUBCASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
  }
}
