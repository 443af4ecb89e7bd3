#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace grids {

/// Dense H x W x C feature map, row-major (i = row / y, j = column / x,
/// c = channel). Immutable after construction; every value is finite.
class FeatureGrid {
 public:
  FeatureGrid(std::size_t height, std::size_t width, std::size_t channels,
              std::vector<float> values);

  static FeatureGrid filled(std::size_t height, std::size_t width, std::size_t channels,
                            float value);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t patch_count() const noexcept { return height_ * width_; }

  // Channel vector of patch (i, j). Throws IndexError naming the bad axis.
  std::span<const float> at(std::size_t i, std::size_t j) const;
  // Channel vector by flat patch index i * W + j.
  std::span<const float> patch(std::size_t flat) const;

  std::span<const float> values() const noexcept { return values_; }

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<float> values_;
};

/// Per-channel mean over all patches of a grid.
struct ContextVector {
  std::vector<float> values;
  std::size_t channels() const noexcept { return values.size(); }
};

ContextVector global_average_pool(const FeatureGrid& grid);

// Gradient of global_average_pool: every patch gets grad_out[c] / (H*W).
FeatureGrid gap_backward(std::span<const float> grad_out, std::size_t height, std::size_t width,
                         std::size_t channels);

// FGRID1: "FGRID1 H W C\n" followed by H*W*C little-endian float32, row-major.
void write_fgrid(std::ostream& out, const FeatureGrid& grid);
void write_fgrid(const std::filesystem::path& path, const FeatureGrid& grid);
FeatureGrid read_fgrid(std::istream& in);
FeatureGrid read_fgrid(const std::filesystem::path& path);

}  // namespace grids
