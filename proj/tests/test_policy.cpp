#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "grids/errors.hpp"
#include "grids/policy.hpp"
#include "grids/sampler.hpp"
#include "reference.hpp"
#include "test_util.hpp"

using namespace grids;

namespace {

constexpr std::size_t kDim = 8;

PolicyConfig cfg_d8() {
  PolicyConfig cfg;
  cfg.model_dim = kDim;
  return cfg;
}

ParameterStore policy_params(std::uint64_t seed, double sd) {
  ParameterStore store;
  Rng rng(seed);
  init_policy_params(store, cfg_d8(), rng);
  test::fill_normal(store, seed + 100, sd);
  return store;
}

std::vector<float> random_tokens(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> t(count * kDim);
  for (float& v : t) v = static_cast<float>(rng.normal());
  return t;
}

}  // namespace

TEST_CASE("attention_forward") {
  const auto cfg = cfg_d8();
  SUBCASE("no sparse tokens: the query attends to itself") {
    const auto store = policy_params(1, 0.3);
    const auto tape = attention_forward({}, 0, store, cfg);
    REQUIRE(tape.attn.rows == 1);
    CHECK(tape.attn(0, 0) == 1.0f);
    const auto expect = ref::policy_forward({}, 0, ref::to_double(store), kDim, 4, 0.5, 0.5);
    for (std::size_t c = 0; c < kDim; ++c) CHECK(std::abs(tape.y2(0, c) - expect.block_out[c]) <= 1e-5);
  }
  SUBCASE("identical tokens give uniform attention") {
    auto store = policy_params(2, 0.3);
    const auto token = random_tokens(1, 3);
    store.get(names::kQueryToken).values = token;
    std::vector<float> tokens;
    for (int n = 0; n < 5; ++n) tokens.insert(tokens.end(), token.begin(), token.end());
    const auto tape = attention_forward(tokens, 5, store, cfg);
    for (std::size_t j = 0; j < 6; ++j) CHECK(tape.attn(0, j) == doctest::Approx(1.0 / 6.0));
    for (std::size_t c = 0; c < kDim; ++c) CHECK(tape.o(0, c) == doctest::Approx(tape.v(1, c)).epsilon(1e-6));
  }
  SUBCASE("matches a step-by-step reference (seed 7)") {
    const auto store = policy_params(7, 0.3);
    const auto tokens = random_tokens(6, 7);
    const auto tape = attention_forward(tokens, 6, store, cfg);
    const auto expect = ref::policy_forward(ref::Vec(tokens.begin(), tokens.end()), 6,
                                            ref::to_double(store), kDim, 4, 0.5, 0.5);
    for (std::size_t n = 0; n < expect.block_out.size(); ++n) {
      CHECK(std::abs(tape.y2.data[n] - expect.block_out[n]) <= 1e-5);
    }
    for (std::size_t i = 0; i < 7; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 7; ++j) row += tape.attn(i, j);
      CHECK(std::abs(row - 1.0) <= 1e-6);
    }
  }
  SUBCASE("dimension mismatch") {
    const auto store = policy_params(1, 0.3);
    const std::vector<float> bad(kDim * 2 + 1);
    CHECK_THROWS_AS(attention_forward(bad, 2, store, cfg), ShapeError);
  }
}

TEST_CASE("head_and_loss") {
  const auto cfg = cfg_d8();
  auto store = policy_params(3, 0.3);
  std::fill(store.get(names::kHeadW).values.begin(), store.get(names::kHeadW).values.end(), 0.0f);
  store.get(names::kHeadB).values = {0.0f, 0.0f};
  auto tape = attention_forward(random_tokens(2, 4), 2, store, cfg);

  auto r = head_and_loss(tape, store, cfg, {0.5f, 0.5f});
  CHECK(r.prediction == std::vector<float>{0.5f, 0.5f});
  CHECK(r.loss == 0.0);

  r = head_and_loss(tape, store, cfg, {0.5f, 0.7f});
  CHECK(r.loss == doctest::Approx(0.02).epsilon(1e-6));

  const auto random = policy_params(5, 0.3);
  auto tape2 = attention_forward(random_tokens(3, 6), 3, random, cfg);
  r = head_and_loss(tape2, random, cfg, {0.2f, 0.9f});
  const double expect = ((r.prediction[0] - 0.2f) * (r.prediction[0] - 0.2f) +
                         (r.prediction[1] - 0.9f) * (r.prediction[1] - 0.9f)) /
                        2.0;
  CHECK(r.loss == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("policy_backward") {
  const auto cfg = cfg_d8();
  auto store = policy_params(11, 0.3);
  const auto tokens = random_tokens(5, 12);
  const Coord target{0.3f, 0.8f};
  auto tape = attention_forward(tokens, 5, store, cfg);
  head_and_loss(tape, store, cfg, target);

  SUBCASE("zero d_loss") {
    store.zero_grads();
    const auto dx = policy_backward(tape, 0.0f, store, cfg);
    for (float v : dx.data) CHECK(v == 0.0f);
    for (const auto& p : store)
      for (float g : p.grads) CHECK(g == 0.0f);
  }

  SUBCASE("finite differences on every parameter group and the inputs") {
    store.zero_grads();
    const auto dx = policy_backward(tape, 1.0f, store, cfg);
    auto params = ref::to_double(store);
    ref::Vec x(tokens.begin(), tokens.end());
    auto loss = [&] {
      return ref::policy_forward(x, 5, params, kDim, 4, target.x, target.y).loss;
    };
    Rng rng(13);
    for (const auto& p : store) {
      for (int n = 0; n < 6; ++n) {
        const std::size_t idx = rng.below(p.numel());
        const double numeric = ref::central_diff(params[p.name], idx, 1e-6, loss);
        INFO(p.name << "[" << idx << "]");
        CHECK(ref::grad_close(p.grads[idx], numeric, 1e-3, 1e-7));
      }
    }
    for (std::size_t idx = 0; idx < x.size(); ++idx) {
      const double numeric = ref::central_diff(x, idx, 1e-6, loss);
      CHECK(ref::grad_close(dx.data[kDim + idx], numeric, 1e-3, 1e-7));
    }
  }
}

TEST_CASE("permuting sparse tokens leaves the query output unchanged") {
  const auto cfg = cfg_d8();
  const auto store = policy_params(21, 0.3);
  const auto tokens = random_tokens(6, 22);
  const auto base = attention_forward(tokens, 6, store, cfg);
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
    for (std::size_t i = 5; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    std::vector<float> permuted;
    for (auto k : order) {
      permuted.insert(permuted.end(), tokens.begin() + k * kDim, tokens.begin() + (k + 1) * kDim);
    }
    const auto t = attention_forward(permuted, 6, store, cfg);
    for (std::size_t c = 0; c < kDim; ++c) CHECK(std::abs(t.y2(0, c) - base.y2(0, c)) <= 1e-5);
  }
}

TEST_CASE("end-to-end gradient from the loss to the sampling coordinates") {
  SamplerConfig scfg;
  scfg.num_tokens = 3;
  scfg.hidden_width = 10;
  scfg.fourier_bands = 3;
  const auto cfg = cfg_d8();
  auto store = policy_params(31, 0.3);
  Rng rng(32);
  init_sampler_params(store, kDim, scfg, rng);
  test::fill_normal(store, 33, 0.3);
  const auto grid = test::random_grid(6, 7, kDim, 34);
  const Coord target{0.6f, 0.2f};

  const auto out = grids_forward(grid, store, scfg);
  auto tape = attention_forward(out.tokens.tokens, 3, store, cfg);
  head_and_loss(tape, store, cfg, target);
  store.zero_grads();
  const auto dx = policy_backward(tape, 1.0f, store, cfg);
  const std::span<const float> upstream(dx.data.data() + kDim, 3 * kDim);
  const auto grads = grids_backward(out.tape, upstream, store);

  const auto params = ref::to_double(store);
  const auto g = ref::to_double(grid);
  ref::Vec coords(out.tape.predicted.begin(), out.tape.predicted.end());
  auto loss = [&] {
    ref::Vec tokens;
    for (std::size_t k = 0; k < 3; ++k) {
      const double x = std::clamp(coords[2 * k] * 6.0, 0.0, 6.0 - 1e-4);
      const double y = std::clamp(coords[2 * k + 1] * 5.0, 0.0, 5.0 - 1e-4);
      const auto f = ref::bilinear(g, x, y);
      const auto e = ref::encode(coords[2 * k], coords[2 * k + 1], params, 3, kDim);
      for (std::size_t c = 0; c < kDim; ++c) tokens.push_back(f[c] + e[c]);
    }
    return ref::policy_forward(tokens, 3, params, kDim, 4, target.x, target.y).loss;
  };
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(ref::grad_close(grads.coord_grads[k].x, ref::central_diff(coords, 2 * k, 1e-6, loss),
                          1e-3, 1e-7));
    CHECK(ref::grad_close(grads.coord_grads[k].y, ref::central_diff(coords, 2 * k + 1, 1e-6, loss),
                          1e-3, 1e-7));
  }
}
