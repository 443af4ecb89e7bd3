#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "grids/config_text.hpp"

namespace grids::cli {

enum ExitCode : int {
  kOk = 0,
  kParseError = 1,
  kNumericError = 2,
  kIoError = 3,
};

/// What a successful run produced. Paths are relative to the output directory.
struct RunManifest {
  std::string run_id;
  std::string command;
  std::string config_text;  // canonical key = value snapshot
  std::string config_digest;
  std::vector<std::string> artifacts;

  std::string to_json() const;
};

// Seed precedence: flag > GRIDS_SEED > config file. Throws ConfigError for a
// malformed GRIDS_SEED.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const char* env,
                           std::uint64_t from_file);

// Parses a config file. Throws IoError or ConfigParseError.
RunSpec load_run_spec(const std::filesystem::path& path);

// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace grids::cli
