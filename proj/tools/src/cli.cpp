#include "grids_cli/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

#include "grids/analysis.hpp"
#include "grids/checkpoint.hpp"
#include "grids/errors.hpp"
#include "grids/feature_grid.hpp"
#include "grids/flops.hpp"
#include "grids/io.hpp"
#include "grids/task.hpp"
#include "grids/trainer.hpp"

namespace grids::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSyntheticStream = 0x5eed;

// A failure with a chosen exit code, raised where the generic mapping would be wrong.
struct CommandError {
  int code;
  std::string message;
};

template <typename T>
bool parse_uint(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return !s.empty() && ec == std::errc{} && ptr == end;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

/// Files produced by a command, written only once everything succeeded.
/// Everything goes to a staging directory first and is then renamed into
/// place, so a failed write leaves no partial artifacts behind.
class Artifacts {
 public:
  void add(std::string relpath, std::string bytes) {
    files_.emplace_back(std::move(relpath), std::move(bytes));
  }

  std::vector<std::string> paths() const {
    std::vector<std::string> out;
    for (const auto& f : files_) out.push_back(f.first);
    return out;
  }

  void commit(const fs::path& out_dir) const {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());
    const fs::path stage = out_dir / (".stage-" + std::to_string(::getpid()));
    try {
      for (const auto& [rel, bytes] : files_) {
        const fs::path dst = stage / rel;
        fs::create_directories(dst.parent_path(), ec);
        if (ec) throw IoError("cannot create " + dst.parent_path().string());
        write_file_atomic(dst, bytes);
      }
      for (const auto& [rel, bytes] : files_) {
        const fs::path dst = out_dir / rel;
        fs::create_directories(dst.parent_path(), ec);
        if (ec) throw IoError("cannot create " + dst.parent_path().string());
        fs::rename(stage / rel, dst, ec);
        if (ec) throw IoError("cannot move artifact into " + dst.string());
      }
    } catch (...) {
      fs::remove_all(stage, ec);
      throw;
    }
    fs::remove_all(stage, ec);
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

struct RunOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig experiment_for(const RunSpec& spec, const RunOptions& opts) {
  ExperimentConfig cfg = spec.experiment;
  cfg.train.seed = resolve_seed(opts.seed, std::getenv("GRIDS_SEED"), cfg.train.seed);
  return cfg.normalized();
}

std::string run_id(std::string_view command, const ExperimentConfig& cfg) {
  return std::string(command) + "-" + hex64(config_digest(cfg)).substr(0, 8) + "-s" +
         std::to_string(cfg.train.seed);
}

// Per-forward cost of a strategy: one attention layer over [query; tokens],
// plus the learned sampler when the strategy runs it.
std::uint64_t strategy_flops(const ExperimentConfig& cfg, Strategy s) {
  const std::uint64_t grid_tokens = cfg.task.height * cfg.task.width;
  const std::uint64_t n = (s == Strategy::dense ? grid_tokens : cfg.train.num_tokens) + 1;
  std::optional<SamplerCost> sampler;
  if (s == Strategy::grids || s == Strategy::nearest) {
    sampler = SamplerCost{grid_tokens, cfg.task.channels, cfg.train.num_tokens,
                          cfg.sampler.resolved_hidden(cfg.task.channels), cfg.sampler.fourier_bands};
  }
  return flops_estimate(n, cfg.task.channels, 1, sampler).total;
}

struct StrategyRun {
  RunLog log;
  std::string checkpoint;
  std::string digest;
};

StrategyRun run_strategy(ExperimentConfig cfg, Strategy s) {
  cfg.train.strategy = s;
  auto result = train_experiment(cfg);
  const std::string text = format_experiment_config(cfg);
  return {std::move(result.log), checkpoint_bytes(result.params, text), hex64(fnv1a64(text))};
}

int cmd_train(const RunOptions& opts, std::ostream& out) {
  const auto spec = load_run_spec(opts.config_path);
  const auto cfg = experiment_for(spec, opts);
  const auto run = run_strategy(cfg, cfg.train.strategy);

  Artifacts files;
  files.add("run_log.csv", run_log_csv(run.log));
  files.add("checkpoint.grckpt", run.checkpoint);
  RunManifest manifest{run_id("train", cfg), "train", format_experiment_config(cfg), run.digest,
                       files.paths()};
  manifest.artifacts.push_back("manifest.json");
  files.add("manifest.json", manifest.to_json());
  files.commit(opts.out_dir);

  out << "strategy=" << to_string(cfg.train.strategy) << "\n"
      << "final_loss=" << fmt("%.6f", run.log.final.loss) << "\n"
      << "final_coord_dist=" << fmt("%.6f", run.log.final.coord_dist) << "\n";
  return kOk;
}

int cmd_ablate(const RunOptions& opts, std::ostream& out) {
  const auto spec = load_run_spec(opts.config_path);
  const auto cfg = experiment_for(spec, opts);

  Artifacts files;
  std::string summary = "strategy,final_loss,final_coord_dist,total_flops\n";
  for (Strategy s : spec.strategies) {
    const auto run = run_strategy(cfg, s);
    const std::string dir(to_string(s));
    files.add(dir + "/run_log.csv", run_log_csv(run.log));
    files.add(dir + "/checkpoint.grckpt", run.checkpoint);
    const std::string row = dir + "," + fmt("%.9g", run.log.final.loss) + "," +
                            fmt("%.9g", run.log.final.coord_dist) + "," +
                            std::to_string(strategy_flops(cfg, s));
    summary += row + "\n";
    out << row << "\n";
  }
  files.add("summary.csv", summary);
  RunManifest manifest{run_id("ablate", cfg), "ablate", format_run_config(spec),
                       hex64(fnv1a64(format_run_config(spec))), files.paths()};
  manifest.artifacts.push_back("manifest.json");
  files.add("manifest.json", manifest.to_json());
  files.commit(opts.out_dir);
  return kOk;
}

struct AnalyzeOptions {
  std::string checkpoint;
  std::string grid_file;
  std::optional<std::uint64_t> synthetic;
  std::string out_dir;
};

int cmd_analyze(const AnalyzeOptions& opts, std::ostream& out) {
  ExperimentConfig cfg;
  ParameterStore params;
  try {
    const auto ckpt = checkpoint_load(opts.checkpoint);
    cfg = parse_run_config(ckpt.config_text).experiment.normalized();
    params = store_from_checkpoint(ckpt);
  } catch (const Error& e) {
    throw CommandError{kNumericError, std::string("bad checkpoint: ") + e.what()};
  }

  std::optional<FeatureGrid> grid;
  if (opts.synthetic) {
    const HotspotTask task(cfg.task, cfg.train.seed);
    Rng rng = Rng::stream(*opts.synthetic, kSyntheticStream);
    grid = task.sample(rng).grid;
  } else {
    try {
      grid = read_fgrid(fs::path(opts.grid_file));
    } catch (const Error& e) {
      throw CommandError{kParseError, std::string("bad grid file: ") + e.what()};
    }
  }
  if (grid->channels() != cfg.task.channels) {
    throw CommandError{kParseError, "grid has " + std::to_string(grid->channels()) +
                                        " channels, checkpoint expects " +
                                        std::to_string(cfg.task.channels)};
  }
  cfg.sampler.validate_for(*grid);

  SamplerOutput sampled = [&] {
    Rng rng = Rng::stream(cfg.train.seed, kSyntheticStream + 1);
    try {
      return sample_tokens(cfg, cfg.train.strategy, *grid, params, rng);
    } catch (const ConfigError& e) {
      throw CommandError{kNumericError, std::string("bad checkpoint: ") + e.what()};
    }
  }();
  const auto& tokens = sampled.tokens;

  const auto retention = retention_map(*grid, tokens);
  const auto dense = self_similarity(grid->values(), grid->patch_count(), grid->channels());
  const auto sparse = self_similarity(tokens.tokens, tokens.count, tokens.channels);

  Artifacts files;
  files.add("retention.pgm", pgm_p2(retention.height, retention.width, retention.scores));
  files.add("retention.csv", matrix_csv(retention.height, retention.width, retention.scores));
  files.add("similarity_dense.pgm", pgm_p2(dense.matrix.n, dense.matrix.n, dense.matrix.values));
  files.add("similarity_dense.csv", matrix_csv(dense.matrix.n, dense.matrix.n, dense.matrix.values));
  files.add("similarity_sparse.pgm",
            pgm_p2(sparse.matrix.n, sparse.matrix.n, sparse.matrix.values));
  files.add("similarity_sparse.csv",
            matrix_csv(sparse.matrix.n, sparse.matrix.n, sparse.matrix.values));
  const std::string text = format_experiment_config(cfg);
  RunManifest manifest{run_id("analyze", cfg), "analyze", text, hex64(fnv1a64(text)),
                       files.paths()};
  manifest.artifacts.push_back("manifest.json");
  files.add("manifest.json", manifest.to_json());
  files.commit(opts.out_dir);

  out << "mean_score=" << fmt("%.6f", retention.mean_score) << "\n"
      << "redundancy_dense=" << fmt("%.6f", dense.redundancy) << "\n"
      << "redundancy_sparse=" << fmt("%.6f", sparse.redundancy) << "\n";
  return kOk;
}

struct FlopsOptions {
  std::vector<std::uint64_t> tokens;
  std::uint64_t dim = 0;
  std::uint64_t layers = 1;
  std::string sampler;  // "K,hidden,bands"
  std::optional<std::uint64_t> grid_tokens;
};

int cmd_flops(const FlopsOptions& opts, std::ostream& out) {
  std::optional<SamplerCost> sampler;
  if (!opts.sampler.empty()) {
    std::uint64_t v[3] = {};
    std::string_view rest = opts.sampler;
    for (int n = 0; n < 3; ++n) {
      const auto comma = rest.find(',');
      if ((n < 2) == (comma == std::string_view::npos) || !parse_uint(rest.substr(0, comma), v[n])) {
        throw CommandError{kParseError, "--sampler expects K,hidden,bands"};
      }
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
    const auto max_tokens = *std::max_element(opts.tokens.begin(), opts.tokens.end());
    sampler = SamplerCost{opts.grid_tokens.value_or(max_tokens), opts.dim, v[0], v[1], v[2]};
  }

  std::vector<FlopsReport> reports;
  out << flops_csv_header() << "\n";
  for (auto n : opts.tokens) {
    const bool with_sampler = sampler && sampler->num_tokens == n;
    reports.push_back(flops_estimate(n, opts.dim, opts.layers,
                                     with_sampler ? sampler : std::nullopt));
    out << flops_csv_row(reports.back()) << "\n";
  }
  if (reports.size() == 2) {
    const auto& a = reports[0];
    const auto& b = reports[1];
    out << "quadratic_ratio="
        << fmt("%.3f", static_cast<double>(a.attn_quadratic) / static_cast<double>(b.attn_quadratic))
        << "\n"
        << "total_ratio=" << fmt("%.3f", static_cast<double>(a.total) / static_cast<double>(b.total))
        << "\n";
  }
  return kOk;
}

struct GenGridOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_file;
};

int cmd_gen_grid(const GenGridOptions& opts, std::ostream& out) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = load_run_spec(opts.config_path).experiment;
  cfg = cfg.normalized();
  const HotspotTask task(cfg.task, cfg.train.seed);
  Rng rng = Rng::stream(opts.seed, kSyntheticStream);
  const auto batch = task.sample(rng);
  std::ostringstream bytes(std::ios::binary);
  write_fgrid(bytes, batch.grid);
  write_file_atomic(opts.out_file, bytes.str());
  out << "target=" << fmt("%.6f", batch.target.x) << "," << fmt("%.6f", batch.target.y) << "\n";
  return kOk;
}

template <typename F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const CommandError& e) {
    err << "error: " << e.message << "\n";
    return e.code;
  } catch (const DivergenceError& e) {
    err << "error: training diverged at step " << e.step() << ": " << e.what() << "\n";
    return kNumericError;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kParseError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumericError;
  }
}

}  // namespace

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["command"] = command;
  j["config_digest"] = config_digest;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::istringstream lines(config_text);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) config[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["config"] = std::move(config);
  j["artifacts"] = artifacts;
  return j.dump(2) + "\n";
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const char* env,
                           std::uint64_t from_file) {
  if (flag) return *flag;
  if (env != nullptr) {
    std::uint64_t v = 0;
    if (!parse_uint(std::string_view(env), v)) {
      throw ConfigError("GRIDS_SEED is not an unsigned integer: '" + std::string(env) + "'");
    }
    return v;
  }
  return from_file;
}

RunSpec load_run_spec(const fs::path& path) { return parse_run_config(read_file(path)); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GridS token-pruning toolkit", "grids"};
  app.require_subcommand(1);

  RunOptions train_opts;
  auto* train = app.add_subcommand("train", "Train one strategy from a config file");
  train->add_option("-c,--config", train_opts.config_path, "key = value config file")->required();
  train->add_option("-o,--out", train_opts.out_dir, "Output directory")->required();
  train->add_option("--seed", train_opts.seed, "Overrides GRIDS_SEED and the config seed");

  RunOptions ablate_opts;
  auto* ablate = app.add_subcommand("ablate", "Train every listed strategy under one config");
  ablate->add_option("-c,--config", ablate_opts.config_path, "key = value config file")->required();
  ablate->add_option("-o,--out", ablate_opts.out_dir, "Output directory")->required();
  ablate->add_option("--seed", ablate_opts.seed, "Overrides GRIDS_SEED and the config seed");

  AnalyzeOptions analyze_opts;
  auto* analyze = app.add_subcommand("analyze", "Retention map and self-similarity exports");
  analyze->add_option("--checkpoint", analyze_opts.checkpoint, "GRCKPT1 file")->required();
  auto* grid_opt = analyze->add_option("--grid", analyze_opts.grid_file, "FGRID1 input grid");
  auto* synth_opt =
      analyze->add_option("--synthetic", analyze_opts.synthetic, "Generate a hotspot grid from seed");
  grid_opt->excludes(synth_opt);
  analyze->add_option("-o,--out", analyze_opts.out_dir, "Output directory")->required();

  FlopsOptions flops_opts;
  auto* flops = app.add_subcommand("flops", "Parametric transformer cost");
  flops->add_option("--tokens", flops_opts.tokens, "Token count N (give two for a ratio)")
      ->required()
      ->expected(1, 2);
  flops->add_option("--dim", flops_opts.dim, "Model width d")->required();
  flops->add_option("--layers", flops_opts.layers, "Layer count")->capture_default_str();
  flops->add_option("--sampler", flops_opts.sampler,
                    "K,hidden,bands: add sampler overhead to the row with N = K");
  flops->add_option("--grid-tokens", flops_opts.grid_tokens,
                    "Dense grid size pooled by the sampler (default: largest --tokens)");

  GenGridOptions gen_opts;
  auto* gen = app.add_subcommand("gen-grid", "Write a synthetic hotspot grid as FGRID1");
  gen->add_option("-c,--config", gen_opts.config_path, "key = value config file");
  gen->add_option("--seed", gen_opts.seed, "Grid seed")->required();
  gen->add_option("-o,--out", gen_opts.out_file, "Output file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kParseError;
  }
  if (analyze->parsed() && analyze_opts.grid_file.empty() && !analyze_opts.synthetic) {
    err << "error: analyze needs --grid or --synthetic\n";
    return kParseError;
  }

  return guarded(
      [&] {
        if (train->parsed()) return cmd_train(train_opts, out);
        if (ablate->parsed()) return cmd_ablate(ablate_opts, out);
        if (analyze->parsed()) return cmd_analyze(analyze_opts, out);
        if (flops->parsed()) return cmd_flops(flops_opts, out);
        return cmd_gen_grid(gen_opts, out);
      },
      err);
}

}  // namespace grids::cli
