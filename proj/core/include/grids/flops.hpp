#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace grids {

/// Cost of the token sampler in front of the transformer.
struct SamplerCost {
  std::uint64_t grid_tokens = 256;  // H * W of the dense grid being pooled
  std::uint64_t channels = 32;      // C
  std::uint64_t num_tokens = 16;    // K
  std::uint64_t hidden = 64;        // predictor hidden width
  std::uint64_t bands = 8;          // Fourier bands L
};

/// Parametric transformer cost. Convention: one multiply-add is 2 FLOPs.
/// Per layer with N tokens and width d:
///   attn_quadratic = 4 N^2 d    (Q K^T and A V)
///   attn_linear    = 8 N d^2    (Q, K, V, O projections)
///   ffn            = 16 N d^2   (d -> 4d -> d)
/// Softmax, residuals and activations are not counted. Sampler overhead:
///   pooling  H W C adds
///   MLP      2 C hidden + 2 hidden 2K
///   bilinear K (4 C multiplies + 3 C adds)
///   encoder  K (4L trig evaluations at 1 FLOP each + 2 * 4L * C)
/// Everything is exact unsigned 64-bit arithmetic; overflow throws.
struct FlopsReport {
  std::uint64_t tokens = 0;
  std::uint64_t model_dim = 0;
  std::uint64_t layers = 0;
  std::uint64_t attn_quadratic = 0;  // per layer
  std::uint64_t attn_linear = 0;     // per layer
  std::uint64_t ffn = 0;             // per layer
  std::uint64_t sampler_overhead = 0;
  std::uint64_t total = 0;
};

inline constexpr std::uint64_t kTrigFlops = 1;

std::uint64_t sampler_overhead_flops(const SamplerCost& cost);

// Throws PreconditionError for zero arguments.
FlopsReport flops_estimate(std::uint64_t tokens, std::uint64_t model_dim, std::uint64_t layers,
                           const std::optional<SamplerCost>& sampler = std::nullopt);

std::string flops_csv_header();
std::string flops_csv_row(const FlopsReport& r);

}  // namespace grids
