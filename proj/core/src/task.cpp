#include "grids/task.hpp"

#include <cmath>
#include <string>

#include "grids/errors.hpp"

namespace grids {

namespace {

// n mutually orthonormal vectors of length dim (Gram-Schmidt on Gaussian draws).
std::vector<std::vector<double>> orthonormal_basis(std::size_t n, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < n) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        double proj = 0.0;
        for (std::size_t i = 0; i < dim; ++i) proj += v[i] * b[i];
        for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * b[i];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

void HotspotTaskConfig::validate() const {
  if (height < 2 || width < 2) throw ConfigError("task: height and width must be >= 2");
  if (channels < redundancy_rank + 3) {
    throw ConfigError("task: channels must be >= redundancy_rank + 3 (signal + two position axes)");
  }
  if (!(noise_std >= 0.0f) || !std::isfinite(noise_std)) {
    throw ConfigError("task: noise_std must be finite and non-negative");
  }
  if (!std::isfinite(signal_amp)) throw ConfigError("task: signal_amp must be finite");
  if (!std::isfinite(position_gain)) throw ConfigError("task: position_gain must be finite");
}

HotspotTask::HotspotTask(const HotspotTaskConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = Rng::stream(seed, 0x7a5c);
  const auto basis = orthonormal_basis(cfg_.redundancy_rank + 3, cfg_.channels, rng);
  signal_dir_ = to_float(basis[0]);
  axis_x_ = to_float(basis[1]);
  axis_y_ = to_float(basis[2]);
  for (std::size_t r = 0; r < cfg_.redundancy_rank; ++r) patterns_.push_back(to_float(basis[3 + r]));
}

std::span<const float> HotspotTask::background_pattern(std::size_t r) const {
  if (r >= patterns_.size()) throw IndexError("background_pattern: rank index out of range");
  return patterns_[r];
}

TaskBatch HotspotTask::sample(Rng& rng) const {
  const Coord target{static_cast<float>(rng.uniform(0.1, 0.9)),
                     static_cast<float>(rng.uniform(0.1, 0.9))};
  return sample_at(rng, target);
}

TaskBatch HotspotTask::sample_at(Rng& rng, Coord target) const {
  const std::size_t h = cfg_.height;
  const std::size_t w = cfg_.width;
  const std::size_t c = cfg_.channels;
  std::vector<double> acc(h * w * c, 0.0);

  for (std::size_t p = 0; p < h * w; ++p) {
    double* dst = acc.data() + p * c;
    for (const auto& pattern : patterns_) {
      const double a = rng.uniform(0.5, 1.5);
      for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += a * pattern[ch];
    }
  }
  if (cfg_.noise_std > 0.0f) {
    for (double& v : acc) v += cfg_.noise_std * rng.normal();
  }

  // Splat with the same align-corners map and bilinear weights the sampler reads with.
  const float gx = target.x * static_cast<float>(w - 1);
  const float gy = target.y * static_cast<float>(h - 1);
  const auto s = bilinear_stencil(gx, gy, h, w);
  const std::size_t rows[4] = {s.i0, s.i0, s.i0 + 1, s.i0 + 1};
  const std::size_t cols[4] = {s.j0, s.j0 + 1, s.j0, s.j0 + 1};
  for (std::size_t k = 0; k < 4; ++k) {
    const double weight = s.weights[k];
    if (weight == 0.0) continue;
    const Coord centre = patch_center(rows[k], cols[k], h, w);
    const double cx = cfg_.position_gain * (centre.x - 0.5);
    const double cy = cfg_.position_gain * (centre.y - 0.5);
    double* dst = acc.data() + (rows[k] * w + cols[k]) * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      dst[ch] += weight * (cfg_.signal_amp * signal_dir_[ch] + cx * axis_x_[ch] +
                           cy * axis_y_[ch]);
    }
  }
  return TaskBatch{FeatureGrid(h, w, c, std::vector<float>(acc.begin(), acc.end())), target};
}

}  // namespace grids
