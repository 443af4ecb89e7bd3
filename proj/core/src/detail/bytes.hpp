#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace grids::detail {

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void write_f32_le(std::ostream& out, std::span<const float> values) {
  for (float f : values) write_u32_le(out, std::bit_cast<std::uint32_t>(f));
}

inline bool read_u32_le(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

// Reads up to count floats; a short result means the stream ended early.
inline std::vector<float> read_f32_le(std::istream& in, std::size_t count) {
  std::vector<float> out;
  out.reserve(count < (std::size_t{1} << 20) ? count : (std::size_t{1} << 20));
  std::uint32_t bits;
  while (out.size() < count && read_u32_le(in, bits)) out.push_back(std::bit_cast<float>(bits));
  return out;
}

}  // namespace grids::detail
