#include "grids/policy.hpp"

#include <cmath>
#include <string>

#include "grids/errors.hpp"

namespace grids {

namespace {

using detail::Mat;

constexpr double kInitStd = 0.02;

const Parameter& checked(const ParameterStore& params, std::string_view name, std::size_t numel) {
  const auto& p = params.get(name);
  if (p.numel() != numel) {
    throw ShapeError("parameter '" + p.name + "' has " + std::to_string(p.numel()) +
                     " values, expected " + std::to_string(numel));
  }
  return p;
}

void add_row_sums(std::span<float> g, const Mat& m) {
  for (std::size_t r = 0; r < m.rows; ++r) detail::add_into(g, m.row(r));
}

}  // namespace

void PolicyConfig::validate() const {
  if (model_dim == 0) throw ConfigError("policy: model_dim must be positive");
  if (ffn_expand == 0) throw ConfigError("policy: ffn_expand must be positive");
  if (out_dim == 0) throw ConfigError("policy: out_dim must be positive");
}

void init_policy_params(ParameterStore& params, const PolicyConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.model_dim;
  const std::size_t e = cfg.ffn_expand * d;
  auto normal_fill = [&rng](Parameter& p) {
    for (float& v : p.values) v = static_cast<float>(rng.normal(0.0, kInitStd));
  };
  normal_fill(params.add(std::string(names::kQueryToken), {d}));
  normal_fill(params.add(std::string(names::kWq), {d, d}));
  normal_fill(params.add(std::string(names::kWk), {d, d}));
  normal_fill(params.add(std::string(names::kWv), {d, d}));
  normal_fill(params.add(std::string(names::kWo), {d, d}));
  normal_fill(params.add(std::string(names::kFfnW1), {d, e}));
  params.add(std::string(names::kFfnB1), {e});
  normal_fill(params.add(std::string(names::kFfnW2), {e, d}));
  params.add(std::string(names::kFfnB2), {d});
  normal_fill(params.add(std::string(names::kHeadW), {d, cfg.out_dim}));
  params.add(std::string(names::kHeadB), {cfg.out_dim});
}

PolicyTape attention_forward(std::span<const float> tokens, std::size_t count,
                             const ParameterStore& params, const PolicyConfig& cfg) {
  const std::size_t d = cfg.model_dim;
  const std::size_t e = cfg.ffn_expand * d;
  if (tokens.size() != count * d) {
    throw ShapeError("attention_forward: expected " + std::to_string(count) + " x " +
                     std::to_string(d) + " tokens, got " + std::to_string(tokens.size()) +
                     " values");
  }
  const auto& query = checked(params, names::kQueryToken, d);
  const auto& wq = checked(params, names::kWq, d * d);
  const auto& wk = checked(params, names::kWk, d * d);
  const auto& wv = checked(params, names::kWv, d * d);
  const auto& wo = checked(params, names::kWo, d * d);
  const auto& w1 = checked(params, names::kFfnW1, d * e);
  const auto& b1 = checked(params, names::kFfnB1, e);
  const auto& w2 = checked(params, names::kFfnW2, e * d);
  const auto& b2 = checked(params, names::kFfnB2, d);

  const std::size_t n = count + 1;
  PolicyTape t;
  t.x = Mat(n, d);
  std::copy(query.values.begin(), query.values.end(), t.x.data.begin());
  std::copy(tokens.begin(), tokens.end(), t.x.data.begin() + d);

  t.q = detail::matmul(t.x, wq.values, d);
  t.k = detail::matmul(t.x, wk.values, d);
  t.v = detail::matmul(t.x, wv.values, d);

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  t.attn = Mat(n, n);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double max_s = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      scores[j] = detail::dot(t.q.row(i), t.k.row(j)) * inv_sqrt_d;
      max_s = std::max(max_s, scores[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      scores[j] = std::exp(scores[j] - max_s);
      z += scores[j];
    }
    for (std::size_t j = 0; j < n; ++j) t.attn(i, j) = static_cast<float>(scores[j] / z);
  }

  t.o = Mat(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += static_cast<double>(t.attn(i, j)) * t.v(j, c);
      t.o(i, c) = static_cast<float>(acc);
    }
  }

  t.y1 = detail::matmul(t.o, wo.values, d);
  for (std::size_t idx = 0; idx < t.y1.data.size(); ++idx) t.y1.data[idx] += t.x.data[idx];

  t.hidden = detail::matmul(t.y1, w1.values, e, b1.values);
  for (float& h : t.hidden.data) h = std::tanh(h);

  t.y2 = detail::matmul(t.hidden, w2.values, d, b2.values);
  for (std::size_t idx = 0; idx < t.y2.data.size(); ++idx) t.y2.data[idx] += t.y1.data[idx];
  return t;
}

HeadResult head_and_loss(PolicyTape& tape, const ParameterStore& params, const PolicyConfig& cfg,
                         Coord target) {
  const std::size_t d = cfg.model_dim;
  if (cfg.out_dim != 2) throw ConfigError("head_and_loss: out_dim must be 2 for a coordinate target");
  if (tape.y2.cols != d || tape.y2.rows == 0) throw ShapeError("head_and_loss: tape shape mismatch");
  const auto& wh = checked(params, names::kHeadW, d * cfg.out_dim);
  const auto& bh = checked(params, names::kHeadB, cfg.out_dim);

  HeadResult r;
  r.prediction.resize(cfg.out_dim);
  detail::affine_t(wh.values, bh.values, tape.y2.row(0), r.prediction);
  for (float& p : r.prediction) {
    p = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(p))));
  }
  const float t[2] = {target.x, target.y};
  double sq = 0.0;
  for (std::size_t o = 0; o < cfg.out_dim; ++o) {
    const double diff = static_cast<double>(r.prediction[o]) - t[o];
    sq += diff * diff;
  }
  r.loss = sq / static_cast<double>(cfg.out_dim);
  tape.prediction = r.prediction;
  tape.target.assign(t, t + 2);
  tape.loss = r.loss;
  return r;
}

detail::Mat policy_backward(const PolicyTape& tape, float d_loss, ParameterStore& params,
                            const PolicyConfig& cfg) {
  const std::size_t d = cfg.model_dim;
  const std::size_t e = cfg.ffn_expand * d;
  const std::size_t n = tape.x.rows;
  if (tape.prediction.size() != cfg.out_dim || tape.x.cols != d) {
    throw PreconditionError("policy_backward: tape lacks a head/loss evaluation");
  }
  auto& query = params.get(names::kQueryToken);
  auto& wq = params.get(names::kWq);
  auto& wk = params.get(names::kWk);
  auto& wv = params.get(names::kWv);
  auto& wo = params.get(names::kWo);
  auto& w1 = params.get(names::kFfnW1);
  auto& b1 = params.get(names::kFfnB1);
  auto& w2 = params.get(names::kFfnW2);
  auto& b2 = params.get(names::kFfnB2);
  auto& wh = params.get(names::kHeadW);
  auto& bh = params.get(names::kHeadB);

  // Head: loss = mean (pred - t)^2, pred = sigmoid(a).
  std::vector<float> d_act(cfg.out_dim);
  for (std::size_t o = 0; o < cfg.out_dim; ++o) {
    const float p = tape.prediction[o];
    const float d_pred =
        d_loss * 2.0f * (p - tape.target[o]) / static_cast<float>(cfg.out_dim);
    d_act[o] = d_pred * p * (1.0f - p);
  }
  detail::add_outer(wh.grads, tape.y2.row(0), d_act);
  detail::add_into(bh.grads, d_act);
  Mat dy2(n, d);
  detail::matvec(wh.values, d_act, dy2.row(0));

  // FFN with residual.
  detail::accumulate_at_b(w2.grads, tape.hidden, dy2);
  add_row_sums(b2.grads, dy2);
  Mat du = detail::matmul_wt(dy2, w2.values, e);
  for (std::size_t idx = 0; idx < du.data.size(); ++idx) {
    const float h = tape.hidden.data[idx];
    du.data[idx] *= 1.0f - h * h;
  }
  detail::accumulate_at_b(w1.grads, tape.y1, du);
  add_row_sums(b1.grads, du);
  Mat dy1 = detail::matmul_wt(du, w1.values, d);
  for (std::size_t idx = 0; idx < dy1.data.size(); ++idx) dy1.data[idx] += dy2.data[idx];

  // Output projection with residual.
  detail::accumulate_at_b(wo.grads, tape.o, dy1);
  const Mat d_o = detail::matmul_wt(dy1, wo.values, d);
  Mat dx = dy1;

  // o = attn v
  Mat d_attn(n, n);
  Mat dv(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d_attn(i, j) = static_cast<float>(detail::dot(d_o.row(i), tape.v.row(j)));
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(tape.attn(i, j)) * d_o(i, c);
      dv(j, c) = static_cast<float>(acc);
    }
  }

  // Row softmax of scaled scores.
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Mat ds(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) inner += static_cast<double>(tape.attn(i, j)) * d_attn(i, j);
    for (std::size_t j = 0; j < n; ++j) {
      ds(i, j) = static_cast<float>(tape.attn(i, j) * (d_attn(i, j) - inner) * inv_sqrt_d);
    }
  }
  Mat dq(n, d);
  Mat dk(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      double aq = 0.0;
      double ak = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        aq += static_cast<double>(ds(i, j)) * tape.k(j, c);
        ak += static_cast<double>(ds(j, i)) * tape.q(j, c);
      }
      dq(i, c) = static_cast<float>(aq);
      dk(i, c) = static_cast<float>(ak);
    }
  }

  detail::accumulate_at_b(wq.grads, tape.x, dq);
  detail::accumulate_at_b(wk.grads, tape.x, dk);
  detail::accumulate_at_b(wv.grads, tape.x, dv);
  for (const auto& [dm, w] : {std::pair<const Mat*, const Parameter*>{&dq, &wq},
                              {&dk, &wk}, {&dv, &wv}}) {
    const Mat part = detail::matmul_wt(*dm, w->values, d);
    for (std::size_t idx = 0; idx < dx.data.size(); ++idx) dx.data[idx] += part.data[idx];
  }
  detail::add_into(query.grads, dx.row(0));
  return dx;
}

}  // namespace grids
