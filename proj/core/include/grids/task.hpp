#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "grids/feature_grid.hpp"
#include "grids/rng.hpp"
#include "grids/sampler.hpp"

namespace grids {

/// Synthetic hotspot-localisation task.
///
/// Each grid is a rank-`redundancy_rank` background (fixed orthonormal
/// patterns mixed per patch with coefficients in [0.5, 1.5]) plus i.i.d.
/// Gaussian noise, plus a hotspot splatted with bilinear weights at a
/// continuous target location. The hotspot content at patch (i, j) is
/// `signal_amp * signal_dir + position_gain * code(i, j)` where `code` is a
/// linear absolute-position code ((x - 0.5) * u + (y - 0.5) * v) evaluated
/// at the patch centre. The code
/// is what lets a globally pooled summary locate the hotspot: average pooling
/// is translation-invariant, so a pure `signal_dir` splat pools to the same
/// vector wherever it lands.
///
/// signal_dir, the background patterns and u, v are mutually orthonormal.
struct HotspotTaskConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 32;
  float noise_std = 0.1f;
  float signal_amp = 1.0f;
  std::size_t redundancy_rank = 2;
  float position_gain = 32.0f;

  void validate() const;
};

struct TaskBatch {
  FeatureGrid grid;
  Coord target;  // normalized, each component in [0.1, 0.9]
};

class HotspotTask {
 public:
  // The basis (signal_dir, background patterns, position axes) is drawn from seed.
  HotspotTask(const HotspotTaskConfig& cfg, std::uint64_t seed);

  const HotspotTaskConfig& config() const noexcept { return cfg_; }
  std::span<const float> signal_dir() const noexcept { return signal_dir_; }
  std::span<const float> background_pattern(std::size_t r) const;
  std::span<const float> position_axis_x() const noexcept { return axis_x_; }
  std::span<const float> position_axis_y() const noexcept { return axis_y_; }

  TaskBatch sample(Rng& rng) const;
  TaskBatch sample_at(Rng& rng, Coord target) const;

 private:
  HotspotTaskConfig cfg_;
  std::vector<float> signal_dir_;
  std::vector<std::vector<float>> patterns_;
  std::vector<float> axis_x_;
  std::vector<float> axis_y_;
};

inline TaskBatch gen_task(const HotspotTask& task, Rng& rng) { return task.sample(rng); }

}  // namespace grids
