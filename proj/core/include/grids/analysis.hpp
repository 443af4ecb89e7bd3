#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "grids/feature_grid.hpp"
#include "grids/sampler.hpp"

namespace grids {

// Cosine similarity; defined as 0 when either norm is below 1e-12.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Per-patch coverage: R(i, j) = max_k cos(grid[i, j], sample_k).
struct RetentionMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> scores;  // H x W, row-major
  double mean_score = 0.0;

  float at(std::size_t i, std::size_t j) const { return scores[i * width + j]; }
};

// samples: count x C feature vectors, count >= 1.
RetentionMap retention_map(const FeatureGrid& grid, std::span<const float> samples,
                           std::size_t count);
// Uses the sampled features (not the position-injected tokens).
RetentionMap retention_map(const FeatureGrid& grid, const SparseTokenSet& samples);

struct SimilarityMatrix {
  std::size_t n = 0;
  std::vector<float> values;  // n x n, exactly symmetric

  float at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

struct SelfSimilarity {
  SimilarityMatrix matrix;
  double redundancy = 0.0;  // mean |off-diagonal|, 0 for n = 1
};

// tokens: n x channels, n >= 1.
SelfSimilarity self_similarity(std::span<const float> tokens, std::size_t n, std::size_t channels);

}  // namespace grids
