#include "grids/analysis.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "grids/detail/linalg.hpp"
#include "grids/errors.hpp"

namespace grids {

namespace {

constexpr double kZeroNorm = 1e-12;

std::vector<double> row_norms(std::span<const float> rows, std::size_t n, std::size_t c) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto r = rows.subspan(k * c, c);
    out[k] = std::sqrt(detail::dot(r, r));
  }
  return out;
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  const double na = std::sqrt(detail::dot(a, a));
  const double nb = std::sqrt(detail::dot(b, b));
  if (na < kZeroNorm || nb < kZeroNorm) return 0.0;
  return detail::dot(a, b) / (na * nb);
}

RetentionMap retention_map(const FeatureGrid& grid, std::span<const float> samples,
                           std::size_t count) {
  const std::size_t c = grid.channels();
  if (count == 0) throw PreconditionError("retention_map: need at least one sample");
  if (samples.size() != count * c) {
    throw ShapeError("retention_map: samples have " + std::to_string(samples.size()) +
                     " values, expected " + std::to_string(count) + " x " + std::to_string(c));
  }
  const auto sample_norm = row_norms(samples, count, c);
  RetentionMap m;
  m.height = grid.height();
  m.width = grid.width();
  m.scores.resize(grid.patch_count());
  double total = 0.0;
  for (std::size_t p = 0; p < grid.patch_count(); ++p) {
    const auto g = grid.patch(p);
    const double gn = std::sqrt(detail::dot(g, g));
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < count; ++k) {
      double cs = 0.0;
      if (gn >= kZeroNorm && sample_norm[k] >= kZeroNorm) {
        cs = detail::dot(g, samples.subspan(k * c, c)) / (gn * sample_norm[k]);
      }
      best = std::max(best, cs);
    }
    m.scores[p] = static_cast<float>(best);
    total += m.scores[p];
  }
  m.mean_score = total / static_cast<double>(grid.patch_count());
  return m;
}

RetentionMap retention_map(const FeatureGrid& grid, const SparseTokenSet& samples) {
  if (samples.channels != grid.channels()) {
    throw ShapeError("retention_map: sample channels do not match the grid");
  }
  return retention_map(grid, samples.features, samples.count);
}

SelfSimilarity self_similarity(std::span<const float> tokens, std::size_t n, std::size_t channels) {
  if (n == 0) throw PreconditionError("self_similarity: need at least one token");
  if (tokens.size() != n * channels) throw ShapeError("self_similarity: token shape mismatch");
  const auto norms = row_norms(tokens, n, channels);
  SelfSimilarity out;
  out.matrix.n = n;
  out.matrix.values.assign(n * n, 0.0f);
  double off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = tokens.subspan(i * channels, channels);
    for (std::size_t j = i; j < n; ++j) {
      double cs = 0.0;
      if (norms[i] >= kZeroNorm && norms[j] >= kZeroNorm) {
        cs = detail::dot(a, tokens.subspan(j * channels, channels)) / (norms[i] * norms[j]);
      }
      const auto v = static_cast<float>(cs);
      out.matrix.values[i * n + j] = v;
      out.matrix.values[j * n + i] = v;
      if (j != i) off += 2.0 * std::fabs(static_cast<double>(v));
    }
  }
  out.redundancy = n > 1 ? off / static_cast<double>(n * (n - 1)) : 0.0;
  return out;
}

}  // namespace grids
