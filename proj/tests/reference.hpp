#pragma once

// Straightforward double-precision re-implementations of the forward passes.
// They share no code with the library and serve as oracles: direct value
// comparisons, and central finite differences in double precision.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "grids/feature_grid.hpp"
#include "grids/parameter_store.hpp"

namespace ref {

using Vec = std::vector<double>;
using Params = std::map<std::string, Vec, std::less<>>;

inline Params to_double(const grids::ParameterStore& store) {
  Params out;
  for (const auto& p : store) out[p.name] = Vec(p.values.begin(), p.values.end());
  return out;
}

struct Grid {
  std::size_t h = 0, w = 0, c = 0;
  Vec v;
  double at(std::size_t i, std::size_t j, std::size_t ch) const { return v[(i * w + j) * c + ch]; }
};

inline Grid to_double(const grids::FeatureGrid& g) {
  return {g.height(), g.width(), g.channels(), Vec(g.values().begin(), g.values().end())};
}

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

struct SamplerResult {
  Vec context;
  Vec coords;    // 2K, normalized
  Vec features;  // K x C
  Vec pos;       // K x C
  Vec tokens;    // K x C
};

struct SamplerShape {
  std::size_t k = 4;
  std::size_t hidden = 64;
  std::size_t bands = 8;
  double eps = 1e-4;
};

inline Vec fourier(double x, double y, std::size_t bands) {
  Vec f;
  for (std::size_t l = 0; l < bands; ++l) {
    const double a = std::ldexp(std::numbers::pi, static_cast<int>(l));
    f.push_back(std::sin(a * x));
    f.push_back(std::cos(a * x));
    f.push_back(std::sin(a * y));
    f.push_back(std::cos(a * y));
  }
  return f;
}

inline Vec encode(double x, double y, const Params& p, std::size_t bands, std::size_t c) {
  const Vec f = fourier(x, y, bands);
  const Vec& wp = p.find("encoder.wp")->second;
  const Vec& bp = p.find("encoder.bp")->second;
  Vec out(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = bp[ch];
    for (std::size_t r = 0; r < f.size(); ++r) s += wp[r * c + ch] * f[r];
    out[ch] = s;
  }
  return out;
}

// Bilinear read at continuous grid coordinates, with the neighbour weights
// written out long-hand.
inline Vec bilinear(const Grid& g, double x, double y) {
  const auto j0 = std::min<std::size_t>(static_cast<std::size_t>(std::floor(x)), g.w - 2);
  const auto i0 = std::min<std::size_t>(static_cast<std::size_t>(std::floor(y)), g.h - 2);
  const double dx = x - static_cast<double>(j0);
  const double dy = y - static_cast<double>(i0);
  Vec out(g.c);
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    out[ch] = (1 - dx) * (1 - dy) * g.at(i0, j0, ch) + dx * (1 - dy) * g.at(i0, j0 + 1, ch) +
              (1 - dx) * dy * g.at(i0 + 1, j0, ch) + dx * dy * g.at(i0 + 1, j0 + 1, ch);
  }
  return out;
}

inline Vec predict(const Vec& z, const Params& p, const SamplerShape& s) {
  const std::size_t c = z.size();
  const Vec& w1 = p.find("sampler.w1")->second;
  const Vec& b1 = p.find("sampler.b1")->second;
  const Vec& w2 = p.find("sampler.w2")->second;
  const Vec& b2 = p.find("sampler.b2")->second;
  Vec hid(s.hidden);
  for (std::size_t h = 0; h < s.hidden; ++h) {
    double a = b1[h];
    for (std::size_t ch = 0; ch < c; ++ch) a += w1[ch * s.hidden + h] * z[ch];
    hid[h] = std::tanh(a);
  }
  Vec out(2 * s.k);
  for (std::size_t o = 0; o < 2 * s.k; ++o) {
    double a = b2[o];
    for (std::size_t h = 0; h < s.hidden; ++h) a += w2[h * 2 * s.k + o] * hid[h];
    out[o] = sigmoid(a);
  }
  return out;
}

inline SamplerResult sampler_forward(const Grid& g, const Params& p, const SamplerShape& s) {
  SamplerResult r;
  r.context.assign(g.c, 0.0);
  for (std::size_t i = 0; i < g.h; ++i)
    for (std::size_t j = 0; j < g.w; ++j)
      for (std::size_t ch = 0; ch < g.c; ++ch) r.context[ch] += g.at(i, j, ch);
  for (double& v : r.context) v /= static_cast<double>(g.h * g.w);

  r.coords = predict(r.context, p, s);
  for (std::size_t k = 0; k < s.k; ++k) {
    const double px = r.coords[2 * k];
    const double py = r.coords[2 * k + 1];
    const double x = std::clamp(px * static_cast<double>(g.w - 1), 0.0,
                                static_cast<double>(g.w - 1) - s.eps);
    const double y = std::clamp(py * static_cast<double>(g.h - 1), 0.0,
                                static_cast<double>(g.h - 1) - s.eps);
    const Vec f = bilinear(g, x, y);
    const Vec e = encode(px, py, p, s.bands, g.c);
    for (std::size_t ch = 0; ch < g.c; ++ch) {
      r.features.push_back(f[ch]);
      r.pos.push_back(e[ch]);
      r.tokens.push_back(f[ch] + e[ch]);
    }
  }
  return r;
}

struct PolicyResult {
  Vec block_out;  // (K+1) x d
  Vec attn;       // (K+1) x (K+1)
  double pred[2] = {0, 0};
  double loss = 0;
};

inline Vec matmul(const Vec& a, std::size_t n, std::size_t in, const Vec& w, std::size_t out) {
  Vec c(n * out, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0;
      for (std::size_t i = 0; i < in; ++i) s += a[r * in + i] * w[i * out + o];
      c[r * out + o] = s;
    }
  return c;
}

inline PolicyResult policy_forward(const Vec& tokens, std::size_t count, const Params& p,
                                   std::size_t d, std::size_t expand, double tx, double ty) {
  const std::size_t n = count + 1;
  const std::size_t e = expand * d;
  Vec x(p.find("policy.query")->second);
  x.insert(x.end(), tokens.begin(), tokens.end());
  const Vec q = matmul(x, n, d, p.find("policy.wq")->second, d);
  const Vec k = matmul(x, n, d, p.find("policy.wk")->second, d);
  const Vec v = matmul(x, n, d, p.find("policy.wv")->second, d);

  PolicyResult r;
  r.attn.assign(n * n, 0.0);
  Vec o(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Vec s(n);
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < d; ++c) dot += q[i * d + c] * k[j * d + c];
      s[j] = dot / std::sqrt(static_cast<double>(d));
    }
    const double m = *std::max_element(s.begin(), s.end());
    double z = 0;
    for (double& sj : s) z += (sj = std::exp(sj - m));
    for (std::size_t j = 0; j < n; ++j) {
      r.attn[i * n + j] = s[j] / z;
      for (std::size_t c = 0; c < d; ++c) o[i * d + c] += s[j] / z * v[j * d + c];
    }
  }
  Vec y1 = matmul(o, n, d, p.find("policy.wo")->second, d);
  for (std::size_t i = 0; i < y1.size(); ++i) y1[i] += x[i];
  Vec hid = matmul(y1, n, d, p.find("policy.ffn_w1")->second, e);
  const Vec& b1 = p.find("policy.ffn_b1")->second;
  for (std::size_t i = 0; i < hid.size(); ++i) hid[i] = std::tanh(hid[i] + b1[i % e]);
  Vec y2 = matmul(hid, n, e, p.find("policy.ffn_w2")->second, d);
  const Vec& b2 = p.find("policy.ffn_b2")->second;
  for (std::size_t i = 0; i < y2.size(); ++i) y2[i] += b2[i % d] + y1[i];
  r.block_out = y2;

  const Vec& wh = p.find("policy.head_w")->second;
  const Vec& bh = p.find("policy.head_b")->second;
  const double t[2] = {tx, ty};
  for (std::size_t out = 0; out < 2; ++out) {
    double a = bh[out];
    for (std::size_t c = 0; c < d; ++c) a += wh[c * 2 + out] * y2[c];
    r.pred[out] = sigmoid(a);
    r.loss += (r.pred[out] - t[out]) * (r.pred[out] - t[out]) / 2.0;
  }
  return r;
}

// Central difference of f at x[idx] in double precision.
template <typename F>
double central_diff(Vec& x, std::size_t idx, double h, F&& f) {
  const double saved = x[idx];
  x[idx] = saved + h;
  const double up = f();
  x[idx] = saved - h;
  const double down = f();
  x[idx] = saved;
  return (up - down) / (2.0 * h);
}

// |a - b| <= rel * max(|a|, |b|) or |a - b| <= abs_floor.
inline bool grad_close(double analytic, double numeric, double rel, double abs_floor) {
  const double diff = std::abs(analytic - numeric);
  return diff <= abs_floor || diff <= rel * std::max(std::abs(analytic), std::abs(numeric));
}

}  // namespace ref
