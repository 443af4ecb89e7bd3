#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace grids {

// Grey level for a value in [-1, 1]: round((v + 1) * 127.5), clamped to [0, 255].
std::uint8_t pgm_level(float value);

// ASCII PGM (P2), maxval 255, one image row per line.
std::string pgm_p2(std::size_t height, std::size_t width, std::span<const float> values);

// Long-format CSV "row,col,value" for a rows x cols matrix.
std::string matrix_csv(std::size_t rows, std::size_t cols, std::span<const float> values);

// Writes to a sibling temp file and renames over path. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace grids
