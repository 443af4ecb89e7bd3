#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "grids/trainer.hpp"

namespace grids {

/// A run description as read from a flat `key = value` config file.
///
/// One key per line, `#` starts a comment, blank lines are ignored. Keys:
///   steps batch_size learning_rate adam_beta1 adam_beta2 adam_eps seed
///   strategy tokens log_every eval_samples
///   height width channels noise_std signal_amp redundancy_rank position_gain
///   hidden_width fourier_bands edge_epsilon ffn_expand
///   strategies   (comma-separated, used by `ablate`)
/// Unknown or repeated keys are errors.
struct RunSpec {
  ExperimentConfig experiment;
  std::vector<Strategy> strategies{std::begin(kAllStrategies), std::end(kAllStrategies)};
};

// Throws ConfigParseError with the 1-based line number.
RunSpec parse_run_config(std::string_view text);

// Canonical text for an experiment; parse_run_config(format(x)) == x.
std::string format_experiment_config(const ExperimentConfig& cfg);
std::string format_run_config(const RunSpec& spec);

// FNV-1a 64 of the canonical experiment text.
std::uint64_t config_digest(const ExperimentConfig& cfg);
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace grids
