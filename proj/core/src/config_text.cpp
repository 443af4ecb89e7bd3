#include "grids/config_text.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "grids/errors.hpp"

namespace grids {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view value, std::size_t line, std::string_view key) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || value.empty()) {
    throw ConfigParseError(line, "invalid value '" + std::string(value) + "' for key '" +
                                     std::string(key) + "'");
  }
  return out;
}

std::string fmt_float(float v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

std::vector<Strategy> parse_strategy_list(std::string_view value, std::size_t line) {
  std::vector<Strategy> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    try {
      out.push_back(parse_strategy(item));
    } catch (const ConfigError& e) {
      throw ConfigParseError(line, e.what());
    }
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigParseError(line, "strategies list is empty");
  return out;
}

using Setter = std::function<void(RunSpec&, std::string_view, std::size_t, std::string_view)>;

template <typename T, typename Member>
Setter number_setter(Member member) {
  return [member](RunSpec& s, std::string_view v, std::size_t line, std::string_view key) {
    std::invoke(member, s) = parse_number<T>(v, line, key);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"steps", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.train.steps; })},
      {"batch_size", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.train.batch_size; })},
      {"learning_rate", number_setter<float>([](RunSpec& s) -> auto& { return s.experiment.train.learning_rate; })},
      {"adam_beta1", number_setter<float>([](RunSpec& s) -> auto& { return s.experiment.train.adam_beta1; })},
      {"adam_beta2", number_setter<float>([](RunSpec& s) -> auto& { return s.experiment.train.adam_beta2; })},
      {"adam_eps", number_setter<float>([](RunSpec& s) -> auto& { return s.experiment.train.adam_eps; })},
      {"seed", number_setter<std::uint64_t>([](RunSpec& s) -> auto& { return s.experiment.train.seed; })},
      {"tokens", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.train.num_tokens; })},
      {"log_every", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.train.log_every; })},
      {"eval_samples", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.train.eval_samples; })},
      {"height", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.task.height; })},
      {"width", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.task.width; })},
      {"channels", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.task.channels; })},
      {"noise_std", number_setter<float>([](RunSpec& s) -> auto& { return s.experiment.task.noise_std; })},
      {"signal_amp", number_setter<float>([](RunSpec& s) -> auto& { return s.experiment.task.signal_amp; })},
      {"redundancy_rank", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.task.redundancy_rank; })},
      {"position_gain", number_setter<float>([](RunSpec& s) -> auto& { return s.experiment.task.position_gain; })},
      {"hidden_width", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.sampler.hidden_width; })},
      {"fourier_bands", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.sampler.fourier_bands; })},
      {"edge_epsilon", number_setter<float>([](RunSpec& s) -> auto& { return s.experiment.sampler.edge_epsilon; })},
      {"ffn_expand", number_setter<std::size_t>([](RunSpec& s) -> auto& { return s.experiment.policy.ffn_expand; })},
      {"strategy",
       [](RunSpec& s, std::string_view v, std::size_t line, std::string_view) {
         try {
           s.experiment.train.strategy = parse_strategy(v);
         } catch (const ConfigError& e) {
           throw ConfigParseError(line, e.what());
         }
       }},
      {"strategies",
       [](RunSpec& s, std::string_view v, std::size_t line, std::string_view) {
         s.strategies = parse_strategy_list(v, line);
       }},
  };
  return table;
}

}  // namespace

RunSpec parse_run_config(std::string_view text) {
  RunSpec spec;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigParseError(line_no, "expected 'key = value', got '" + std::string(line) + "'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigParseError(line_no, "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigParseError(line_no, "duplicate key '" + std::string(key) + "'");
    }
    it->second(spec, value, line_no, key);
  }
  return spec;
}

std::string format_experiment_config(const ExperimentConfig& cfg) {
  const auto& t = cfg.train;
  const auto& k = cfg.task;
  const auto& s = cfg.sampler;
  std::string out;
  auto put = [&out](std::string_view key, const std::string& value) {
    out.append(key).append(" = ").append(value).append("\n");
  };
  put("steps", std::to_string(t.steps));
  put("batch_size", std::to_string(t.batch_size));
  put("learning_rate", fmt_float(t.learning_rate));
  put("adam_beta1", fmt_float(t.adam_beta1));
  put("adam_beta2", fmt_float(t.adam_beta2));
  put("adam_eps", fmt_float(t.adam_eps));
  put("seed", std::to_string(t.seed));
  put("strategy", std::string(to_string(t.strategy)));
  put("tokens", std::to_string(t.num_tokens));
  put("log_every", std::to_string(t.log_every));
  put("eval_samples", std::to_string(t.eval_samples));
  put("height", std::to_string(k.height));
  put("width", std::to_string(k.width));
  put("channels", std::to_string(k.channels));
  put("noise_std", fmt_float(k.noise_std));
  put("signal_amp", fmt_float(k.signal_amp));
  put("redundancy_rank", std::to_string(k.redundancy_rank));
  put("position_gain", fmt_float(k.position_gain));
  put("hidden_width", std::to_string(s.hidden_width));
  put("fourier_bands", std::to_string(s.fourier_bands));
  put("edge_epsilon", fmt_float(s.edge_epsilon));
  put("ffn_expand", std::to_string(cfg.policy.ffn_expand));
  return out;
}

std::string format_run_config(const RunSpec& spec) {
  std::string out = format_experiment_config(spec.experiment);
  out += "strategies = ";
  for (std::size_t n = 0; n < spec.strategies.size(); ++n) {
    if (n) out += ",";
    out += to_string(spec.strategies[n]);
  }
  out += "\n";
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_digest(const ExperimentConfig& cfg) {
  return fnv1a64(format_experiment_config(cfg));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace grids
