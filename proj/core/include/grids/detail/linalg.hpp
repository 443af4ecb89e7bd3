#pragma once

// Small dense kernels shared by the sampler and policy. Storage is float32;
// every reduction accumulates in double and rounds once on output.

#include <cstddef>
#include <span>
#include <vector>

namespace grids::detail {

// Row-major n x m matrix of floats.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<float> row(std::size_t r) { return std::span<float>(data).subspan(r * cols, cols); }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data).subspan(r * cols, cols);
  }
};

// out[o] = bias[o] + sum_i w[i, o] * x[i]   (w is in x out, i.e. out = W^T x + b)
inline void affine_t(std::span<const float> w, std::span<const float> bias,
                     std::span<const float> x, std::span<float> out) {
  const std::size_t in = x.size();
  const std::size_t n_out = out.size();
  std::vector<double> acc(n_out, 0.0);
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const float* wr = w.data() + i * n_out;
    for (std::size_t o = 0; o < n_out; ++o) acc[o] += xi * wr[o];
  }
  for (std::size_t o = 0; o < n_out; ++o) {
    out[o] = static_cast<float>(acc[o] + (bias.empty() ? 0.0 : bias[o]));
  }
}

// out[i] = sum_o w[i, o] * y[o]   (w is in x out, i.e. out = W y)
inline void matvec(std::span<const float> w, std::span<const float> y, std::span<float> out) {
  const std::size_t n_out = y.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    const float* wr = w.data() + i * n_out;
    for (std::size_t o = 0; o < n_out; ++o) acc += static_cast<double>(wr[o]) * y[o];
    out[i] = static_cast<float>(acc);
  }
}

// g[i, o] += x[i] * y[o]
inline void add_outer(std::span<float> g, std::span<const float> x, std::span<const float> y) {
  const std::size_t n_out = y.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float xi = x[i];
    if (xi == 0.0f) continue;
    float* gr = g.data() + i * n_out;
    for (std::size_t o = 0; o < n_out; ++o) gr[o] += xi * y[o];
  }
}

inline void add_into(std::span<float> g, std::span<const float> y) {
  for (std::size_t i = 0; i < y.size(); ++i) g[i] += y[i];
}

// C = A W (+ bias per row), A: n x in, W: in x out.
inline Mat matmul(const Mat& a, std::span<const float> w, std::size_t n_out,
                  std::span<const float> bias = {}) {
  Mat c(a.rows, n_out);
  for (std::size_t r = 0; r < a.rows; ++r) affine_t(w, bias, a.row(r), c.row(r));
  return c;
}

// dA = dC W^T, dC: n x out, W: in x out.
inline Mat matmul_wt(const Mat& dc, std::span<const float> w, std::size_t n_in) {
  Mat da(dc.rows, n_in);
  for (std::size_t r = 0; r < dc.rows; ++r) matvec(w, dc.row(r), da.row(r));
  return da;
}

// dW += A^T dC
inline void accumulate_at_b(std::span<float> dw, const Mat& a, const Mat& dc) {
  for (std::size_t r = 0; r < a.rows; ++r) add_outer(dw, a.row(r), dc.row(r));
}

inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

}  // namespace grids::detail
