#include "grids/feature_grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "detail/bytes.hpp"
#include "grids/errors.hpp"

namespace grids {

FeatureGrid::FeatureGrid(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<float> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  if (height_ == 0 || width_ == 0 || channels_ == 0) {
    throw ShapeError("FeatureGrid: dimensions must be positive");
  }
  if (values_.size() != height_ * width_ * channels_) {
    throw ShapeError("FeatureGrid: expected " + std::to_string(height_ * width_ * channels_) +
                     " values, got " + std::to_string(values_.size()));
  }
  for (std::size_t n = 0; n < values_.size(); ++n) {
    if (!std::isfinite(values_[n])) {
      throw NumericError("FeatureGrid: non-finite value at flat offset " + std::to_string(n));
    }
  }
}

FeatureGrid FeatureGrid::filled(std::size_t height, std::size_t width, std::size_t channels,
                                float value) {
  return FeatureGrid(height, width, channels,
                     std::vector<float>(height * width * channels, value));
}

std::span<const float> FeatureGrid::at(std::size_t i, std::size_t j) const {
  if (i >= height_) {
    throw IndexError("FeatureGrid::at: row index " + std::to_string(i) + " out of range [0, " +
                     std::to_string(height_) + ")");
  }
  if (j >= width_) {
    throw IndexError("FeatureGrid::at: column index " + std::to_string(j) +
                     " out of range [0, " + std::to_string(width_) + ")");
  }
  return std::span<const float>(values_).subspan((i * width_ + j) * channels_, channels_);
}

std::span<const float> FeatureGrid::patch(std::size_t flat) const {
  if (flat >= patch_count()) {
    throw IndexError("FeatureGrid::patch: flat index " + std::to_string(flat) + " out of range");
  }
  return std::span<const float>(values_).subspan(flat * channels_, channels_);
}

ContextVector global_average_pool(const FeatureGrid& grid) {
  const std::size_t c_count = grid.channels();
  std::vector<double> sum(c_count, 0.0);
  const auto v = grid.values();
  for (std::size_t p = 0; p < grid.patch_count(); ++p) {
    for (std::size_t c = 0; c < c_count; ++c) sum[c] += v[p * c_count + c];
  }
  ContextVector z;
  z.values.resize(c_count);
  const double inv = 1.0 / static_cast<double>(grid.patch_count());
  for (std::size_t c = 0; c < c_count; ++c) z.values[c] = static_cast<float>(sum[c] * inv);
  return z;
}

FeatureGrid gap_backward(std::span<const float> grad_out, std::size_t height, std::size_t width,
                         std::size_t channels) {
  if (grad_out.size() != channels) {
    throw ShapeError("gap_backward: gradient has " + std::to_string(grad_out.size()) +
                     " channels, expected " + std::to_string(channels));
  }
  if (height == 0 || width == 0) throw ShapeError("gap_backward: empty grid");
  const double inv = 1.0 / static_cast<double>(height * width);
  std::vector<float> per_patch(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    per_patch[c] = static_cast<float>(grad_out[c] * inv);
  }
  std::vector<float> out(height * width * channels);
  for (std::size_t p = 0; p < height * width; ++p) {
    std::copy(per_patch.begin(), per_patch.end(), out.begin() + p * channels);
  }
  return FeatureGrid(height, width, channels, std::move(out));
}

void write_fgrid(std::ostream& out, const FeatureGrid& grid) {
  out << "FGRID1 " << grid.height() << ' ' << grid.width() << ' ' << grid.channels() << '\n';
  detail::write_f32_le(out, grid.values());
  if (!out) throw IoError("write_fgrid: stream write failed");
}

void write_fgrid(const std::filesystem::path& path, const FeatureGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_fgrid: cannot open " + path.string());
  write_fgrid(out, grid);
}

FeatureGrid read_fgrid(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw TruncatedError("FGRID1: missing header line");
  std::istringstream hs(header);
  std::string magic;
  hs >> magic;
  if (magic != "FGRID1") throw BadMagicError("FGRID1: bad magic '" + magic + "'");
  long long h = 0, w = 0, c = 0;
  if (!(hs >> h >> w >> c) || h <= 0 || w <= 0 || c <= 0) {
    throw FormatError("FGRID1: malformed dimensions in header '" + header + "'");
  }
  std::string rest;
  if (hs >> rest) throw FormatError("FGRID1: trailing tokens in header");
  const auto count = static_cast<std::size_t>(h * w * c);
  std::vector<float> values = detail::read_f32_le(in, count);
  if (values.size() != count) {
    throw TruncatedError("FGRID1: expected " + std::to_string(count) + " floats, got " +
                         std::to_string(values.size()));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("FGRID1: trailing bytes after payload");
  }
  return FeatureGrid(static_cast<std::size_t>(h), static_cast<std::size_t>(w),
                     static_cast<std::size_t>(c), std::move(values));
}

FeatureGrid read_fgrid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_fgrid: cannot open " + path.string());
  return read_fgrid(in);
}

}  // namespace grids
