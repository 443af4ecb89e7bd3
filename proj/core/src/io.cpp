#include "grids/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <system_error>

#include <unistd.h>

#include "grids/errors.hpp"

namespace grids {

std::uint8_t pgm_level(float value) {
  const double v = std::round((static_cast<double>(value) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

std::string pgm_p2(std::size_t height, std::size_t width, std::span<const float> values) {
  if (values.size() != height * width) throw ShapeError("pgm_p2: value count mismatch");
  std::string out = "P2\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      if (j) out += ' ';
      out += std::to_string(pgm_level(values[i * width + j]));
    }
    out += '\n';
  }
  return out;
}

std::string matrix_csv(std::size_t rows, std::size_t cols, std::span<const float> values) {
  if (values.size() != rows * cols) throw ShapeError("matrix_csv: value count mismatch");
  std::string out = "row,col,value\n";
  char buf[96];
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g\n", i, j,
                    static_cast<double>(values[i * cols + j]));
      out += buf;
    }
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace grids
