#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "grids/feature_grid.hpp"
#include "grids/parameter_store.hpp"
#include "grids/rng.hpp"

namespace grids {

namespace names {
inline constexpr std::string_view kPredictorW1 = "sampler.w1";  // C x hidden
inline constexpr std::string_view kPredictorB1 = "sampler.b1";  // hidden
inline constexpr std::string_view kPredictorW2 = "sampler.w2";  // hidden x 2K
inline constexpr std::string_view kPredictorB2 = "sampler.b2";  // 2K
inline constexpr std::string_view kEncoderW = "encoder.wp";     // 4L x C
inline constexpr std::string_view kEncoderB = "encoder.bp";     // C
}  // namespace names

struct SamplerConfig {
  std::size_t num_tokens = 4;     // K
  std::size_t hidden_width = 0;   // 0 selects max(2C, 64)
  std::size_t fourier_bands = 8;  // L
  float edge_epsilon = 1e-4f;

  std::size_t resolved_hidden(std::size_t channels) const;
  // Throws ConfigError.
  void validate() const;
  // Adds the grid-dependent checks: H, W >= 2 and K <= H*W.
  void validate_for(const FeatureGrid& grid) const;
};

/// Normalized (x, y) location; x runs along columns, y along rows.
struct Coord {
  float x = 0.0f;
  float y = 0.0f;
};

struct CoordinateSet {
  std::vector<Coord> points;
  std::size_t size() const noexcept { return points.size(); }
};

/// Continuous grid-space location after the align-corners map and edge clamp.
struct GridPoint {
  float x = 0.0f;
  float y = 0.0f;
  bool x_clamped = false;
  bool y_clamped = false;
};

/// Four-neighbour interpolation stencil. Neighbour order is
/// (i0, j0), (i0, j0+1), (i0+1, j0), (i0+1, j0+1).
struct BilinearStencil {
  std::size_t i0 = 0;
  std::size_t j0 = 0;
  float dx = 0.0f;
  float dy = 0.0f;
  std::array<float, 4> weights{};
};

struct BilinearGrad {
  float d_x = 0.0f;  // dL/dx in grid units
  float d_y = 0.0f;
  std::array<std::vector<float>, 4> feature_grads;  // dL/d(neighbour k)
};

struct SparseTokenSet {
  std::size_t count = 0;
  std::size_t channels = 0;
  std::vector<float> features;        // F_spa, count x channels
  std::vector<float> pos_embeddings;  // E_pos, count x channels
  std::vector<float> tokens;          // features + pos_embeddings
  CoordinateSet coords;

  std::span<const float> feature(std::size_t k) const;
  std::span<const float> token(std::size_t k) const;
};

enum class SamplingMode {
  bilinear,  // predicted coordinates, differentiable sampling
  nearest,   // predicted coordinates rounded to a patch; no coordinate gradient
  fixed,     // externally chosen patches (random / top-K / dense)
};

/// Everything the backward pass needs from one forward pass. Holds a
/// non-owning pointer to the input grid, which must outlive the tape.
struct SamplerTape {
  SamplingMode mode = SamplingMode::bilinear;
  const FeatureGrid* grid = nullptr;
  std::size_t num_tokens = 0;
  std::size_t fourier_bands = 0;
  ContextVector context;
  std::vector<float> hidden;                // tanh(W1^T z + b1)
  std::vector<float> predicted;             // sigmoid outputs, 2K
  std::vector<GridPoint> grid_points;       // bilinear / nearest modes
  std::vector<BilinearStencil> stencils;    // bilinear mode
  std::vector<std::size_t> patches;         // nearest / fixed modes: flat patch index
  CoordinateSet encoded;                    // coordinates fed to the encoder
  std::vector<float> fourier;               // K x 4L
};

struct SamplerOutput {
  SparseTokenSet tokens;
  SamplerTape tape;
};

struct SamplerGradients {
  std::vector<Coord> coord_grads;  // dL/dp per token, normalized space
  std::vector<float> grid_grad;    // dL/dgrid, H*W*C
};

// Predictor MLP (N(0, 0.02^2) weights, lattice-initialised output bias) and
// coordinate encoder.
void init_sampler_params(ParameterStore& params, std::size_t channels, const SamplerConfig& cfg,
                         Rng& rng);

// ceil(sqrt(K)) x ceil(sqrt(K)) cell-centre lattice, row-major, first K points.
std::vector<Coord> lattice_coordinates(std::size_t num_tokens);

CoordinateSet predict_coordinates(const ContextVector& context, const ParameterStore& params,
                                  const SamplerConfig& cfg);

GridPoint map_to_grid(Coord p, std::size_t height, std::size_t width, float edge_epsilon);

BilinearStencil bilinear_stencil(float x, float y, std::size_t height, std::size_t width);

std::vector<float> bilinear_sample(const FeatureGrid& grid, const BilinearStencil& stencil);

BilinearGrad bilinear_backward(const FeatureGrid& grid, const BilinearStencil& stencil,
                               std::span<const float> upstream);

// [sin(2^l pi x), cos(2^l pi x), sin(2^l pi y), cos(2^l pi y)] for l = 0..L-1.
std::vector<float> fourier_features(Coord p, std::size_t bands);

// K x C position embeddings Wp^T fourier(p) + bp.
std::vector<float> encode_coordinates(const CoordinateSet& coords, const ParameterStore& params,
                                      const SamplerConfig& cfg);

SamplerOutput grids_forward(const FeatureGrid& grid, const ParameterStore& params,
                            const SamplerConfig& cfg);

// Same pipeline with coordinates rounded to the nearest patch before lookup.
SamplerOutput sample_nearest(const FeatureGrid& grid, const ParameterStore& params,
                             const SamplerConfig& cfg);

// K distinct patches uniformly without replacement.
SamplerOutput sample_random(const FeatureGrid& grid, std::size_t num_tokens, Rng& rng,
                            const ParameterStore& params, const SamplerConfig& cfg);

// K patches with the largest L2 norm; ties go to the lower flat index.
SamplerOutput sample_topk(const FeatureGrid& grid, std::size_t num_tokens,
                          const ParameterStore& params, const SamplerConfig& cfg);

// Every patch in flat order, at its lattice-centre coordinate.
SamplerOutput sample_dense(const FeatureGrid& grid, const ParameterStore& params,
                           const SamplerConfig& cfg);

// Token set over explicit patches (flat indices), used by the discrete baselines.
SamplerOutput sample_patches(const FeatureGrid& grid, std::span<const std::size_t> patches,
                             const ParameterStore& params, const SamplerConfig& cfg);

// Accumulates parameter gradients for the upstream dL/dtokens (K x C).
SamplerGradients grids_backward(const SamplerTape& tape, std::span<const float> upstream,
                                ParameterStore& params);

// Normalized coordinate of a patch centre under the align-corners map.
Coord patch_center(std::size_t i, std::size_t j, std::size_t height, std::size_t width);

}  // namespace grids
