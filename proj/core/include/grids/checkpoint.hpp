#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "grids/parameter_store.hpp"
#include "grids/trainer.hpp"

namespace grids {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// GRCKPT1 layout:
///
///   "GRCKPT1 <version> <digest:16 hex> <config_bytes> <param_count>\n"
///   <config_bytes bytes of key = value config text>
///   per parameter:
///     u32 name_len, name bytes, u32 rank, u32 dims[rank], f32 values[numel]
///
/// Integers and floats are little-endian. The digest is FNV-1a 64 of the
/// config text.
struct CheckpointEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  std::string config_text;
  std::uint64_t config_digest = 0;
  std::vector<CheckpointEntry> entries;
};

std::string checkpoint_bytes(const ParameterStore& params, std::string_view config_text);
// Throws BadMagicError, TruncatedError, ShapeMismatchError or FormatError.
Checkpoint parse_checkpoint(std::string_view bytes);

void checkpoint_save(const std::filesystem::path& path, const ParameterStore& params,
                     const ExperimentConfig& cfg);
Checkpoint checkpoint_load(const std::filesystem::path& path);

// Copies values into an existing store. Every name and shape is validated
// before anything is written (ShapeMismatchError).
void apply_checkpoint(const Checkpoint& ckpt, ParameterStore& params);
ParameterStore store_from_checkpoint(const Checkpoint& ckpt);

// Predicted file size from parameter shapes (header line + config + records).
std::size_t checkpoint_size(const ParameterStore& params, std::string_view config_text);

}  // namespace grids
