#pragma once

/// Runtime configuration for the CLI. Settings load in precedence order
/// defaults < config file < environment < command-line flags. The config
/// file is a flat key-value document with optional [section] headers; keys
/// outside the known set are rejected.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "gensearch/common.hpp"
#include "gensearch/datapipe.hpp"
#include "gensearch/episode.hpp"
#include "gensearch/grpo.hpp"
#include "gensearch/scoring.hpp"

namespace gensearch::config {

struct ConfigError {
  std::string message;
};

struct BackendConfig {
  std::string search_url;
  std::string image_url;
  std::string browse_url;
  std::string policy_url;
  std::string judge_url;
  std::string api_key;
  std::string policy_model;
  std::string judge_model;
};

struct RunConfig {
  int group_size = 1;
  int parallel = 0;  // 0: min(group_size, 8)
  std::string output_dir = "out";
  std::string assets_dir = "assets/prompts";
};

struct CliConfig {
  BackendConfig backends;
  episode::EpisodeConfig episode = episode::EpisodeConfig::train_defaults();
  scoring::RewardConfig reward;
  grpo::GrpoConfig grpo;
  datapipe::FilterRules filter = datapipe::FilterRules::defaults();
  datapipe::SplitSpec split;
  RunConfig run;
};

// ---------------------------------------------------------------------------
// Key-value document parsing
// ---------------------------------------------------------------------------

/// Parses a flat `key = value` document. `[section]` headers prefix the keys
/// that follow ("section.key"); `#` starts a comment; values may be quoted.
inline Expected<std::map<std::string, std::string>, ConfigError> parse_config_text(
    std::string_view text) {
  std::map<std::string, std::string> out;
  std::string section;
  size_t line_number = 0;
  std::istringstream stream{std::string(text)};
  std::string raw_line;
  while (std::getline(stream, raw_line)) {
    ++line_number;
    std::string_view line = trim_view(raw_line);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        return ConfigError{"line " + std::to_string(line_number) + ": unterminated section"};
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      return ConfigError{"line " + std::to_string(line_number) + ": expected key = value"};
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '"') {
      size_t closing = value.find('"', 1);
      if (closing == std::string::npos) {
        return ConfigError{"line " + std::to_string(line_number) + ": unterminated string"};
      }
      value = value.substr(1, closing - 1);
    } else {
      size_t comment = value.find('#');
      if (comment != std::string::npos) value = trim(value.substr(0, comment));
    }
    if (key.empty()) {
      return ConfigError{"line " + std::to_string(line_number) + ": empty key"};
    }
    if (!section.empty()) key = section + "." + key;
    out[key] = value;
  }
  return out;
}

inline Expected<std::map<std::string, std::string>, ConfigError> load_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) return ConfigError{"cannot open config file '" + path + "'"};
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

// ---------------------------------------------------------------------------
// Applying settings
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_bool(const std::string& value, bool& out) {
  if (value == "true" || value == "1" || value == "yes") {
    out = true;
    return true;
  }
  if (value == "false" || value == "0" || value == "no") {
    out = false;
    return true;
  }
  return false;
}

template <typename T>
bool parse_number(const std::string& value, T& out) {
  if constexpr (std::is_floating_point_v<T>) {
    try {
      size_t used = 0;
      double parsed = std::stod(value, &used);
      if (used != value.size()) return false;
      out = static_cast<T>(parsed);
      return true;
    } catch (...) {
      return false;
    }
  } else {
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    return ec == std::errc() && ptr == value.data() + value.size();
  }
}

}  // namespace detail

/// Applies one dotted key. Returns an error for unknown keys or unparseable
/// values; the key set is closed on purpose.
inline std::optional<ConfigError> apply_setting(CliConfig& cfg, const std::string& key,
                                                const std::string& value) {
  auto fail = [&](const char* why) {
    return ConfigError{"setting '" + key + "': " + why + " (value '" + value + "')"};
  };

  auto set_string = [&](std::string& slot) -> std::optional<ConfigError> {
    slot = value;
    return std::nullopt;
  };
  auto set_int = [&](auto& slot) -> std::optional<ConfigError> {
    std::remove_reference_t<decltype(slot)> parsed{};
    if (!detail::parse_number(value, parsed)) return fail("expected an integer");
    slot = parsed;
    return std::nullopt;
  };
  auto set_double = [&](double& slot) -> std::optional<ConfigError> {
    double parsed = 0;
    if (!detail::parse_number(value, parsed)) return fail("expected a number");
    slot = parsed;
    return std::nullopt;
  };
  auto set_bool = [&](bool& slot) -> std::optional<ConfigError> {
    bool parsed = false;
    if (!detail::parse_bool(value, parsed)) return fail("expected true or false");
    slot = parsed;
    return std::nullopt;
  };

  if (key == "backends.search_url") return set_string(cfg.backends.search_url);
  if (key == "backends.image_url") return set_string(cfg.backends.image_url);
  if (key == "backends.browse_url") return set_string(cfg.backends.browse_url);
  if (key == "backends.policy_url") return set_string(cfg.backends.policy_url);
  if (key == "backends.judge_url") return set_string(cfg.backends.judge_url);
  if (key == "backends.api_key") return set_string(cfg.backends.api_key);
  if (key == "backends.policy_model") return set_string(cfg.backends.policy_model);
  if (key == "backends.judge_model") return set_string(cfg.backends.judge_model);

  if (key == "episode.max_tool_calls") return set_int(cfg.episode.max_tool_calls);
  if (key == "episode.max_turns") return set_int(cfg.episode.max_turns);
  if (key == "episode.max_images_per_turn") return set_int(cfg.episode.max_images_per_turn);
  if (key == "episode.max_context_tokens") return set_int(cfg.episode.max_context_tokens);
  if (key == "episode.max_response_tokens_per_turn") {
    return set_int(cfg.episode.max_response_tokens_per_turn);
  }
  if (key == "episode.temperature") return set_double(cfg.episode.decoding.temperature);
  if (key == "episode.top_p") return set_double(cfg.episode.decoding.top_p);
  if (key == "episode.policy_retries") return set_int(cfg.episode.policy_retries);
  if (key == "episode.final_step_on_context_overflow") {
    return set_bool(cfg.episode.final_step_on_context_overflow);
  }
  if (key == "episode.image_id_start") return set_int(cfg.episode.image_id_start);

  if (key == "reward.alpha") return set_double(cfg.reward.alpha);
  if (key == "reward.w_faithfulness") return set_double(cfg.reward.w_faithfulness);
  if (key == "reward.w_visual") return set_double(cfg.reward.w_visual);
  if (key == "reward.w_text") return set_double(cfg.reward.w_text);
  if (key == "reward.w_aesthetics") return set_double(cfg.reward.w_aesthetics);

  if (key == "grpo.epsilon") return set_double(cfg.grpo.epsilon);
  if (key == "grpo.beta_kl") return set_double(cfg.grpo.beta_kl);
  if (key == "grpo.group_size") return set_int(cfg.grpo.group_size);
  if (key == "grpo.std_floor") return set_double(cfg.grpo.std_floor);

  if (key == "filter.max_prompt_tokens") return set_int(cfg.filter.max_prompt_tokens);
  if (key == "filter.require_search_consistency") {
    return set_bool(cfg.filter.require_search_consistency);
  }
  if (key.rfind("filter.min_", 0) == 0) {
    std::string dim = key.substr(std::string("filter.min_").size());
    for (std::string_view known : datapipe::kQualityDimensions) {
      if (dim == known) {
        double parsed = 0;
        if (!detail::parse_number(value, parsed)) return fail("expected a number");
        cfg.filter.min_scores[dim] = parsed;
        return std::nullopt;
      }
    }
    return ConfigError{"setting '" + key + "': unknown quality dimension"};
  }

  if (key == "split.bench_size") return set_int(cfg.split.bench_size);
  if (key == "split.sft_size") return set_int(cfg.split.sft_size);
  if (key == "split.rl_size") return set_int(cfg.split.rl_size);
  if (key == "split.seed") return set_int(cfg.split.seed);

  if (key == "run.group_size") return set_int(cfg.run.group_size);
  if (key == "run.parallel") return set_int(cfg.run.parallel);
  if (key == "run.output_dir") return set_string(cfg.run.output_dir);
  if (key == "run.assets_dir") return set_string(cfg.run.assets_dir);

  return ConfigError{"unknown config key '" + key + "'"};
}

inline std::optional<ConfigError> apply_settings(CliConfig& cfg,
                                                 const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (auto error = apply_setting(cfg, key, value)) return error;
  }
  return std::nullopt;
}

/// Reads the GENSEARCH_* environment variables into their settings.
inline void apply_environment(CliConfig& cfg) {
  struct EnvKey {
    const char* env;
    std::string* slot;
  };
  const EnvKey keys[] = {
      {"GENSEARCH_SEARCH_URL", &cfg.backends.search_url},
      {"GENSEARCH_IMAGE_URL", &cfg.backends.image_url},
      {"GENSEARCH_BROWSE_URL", &cfg.backends.browse_url},
      {"GENSEARCH_POLICY_URL", &cfg.backends.policy_url},
      {"GENSEARCH_JUDGE_URL", &cfg.backends.judge_url},
      {"GENSEARCH_API_KEY", &cfg.backends.api_key},
  };
  for (const EnvKey& key : keys) {
    if (const char* value = std::getenv(key.env)) {
      if (*value != '\0') *key.slot = value;
    }
  }
}

inline std::optional<ConfigError> validate(const CliConfig& cfg) {
  if (!cfg.reward.valid()) {
    return ConfigError{"reward weights must sum to 1 and alpha must lie in [0, 1]"};
  }
  if (cfg.episode.max_tool_calls < 1 || cfg.episode.max_turns < 1 ||
      cfg.episode.max_images_per_turn < 1 || cfg.episode.max_context_tokens < 1 ||
      cfg.episode.max_response_tokens_per_turn < 1) {
    return ConfigError{"episode caps must all be at least 1"};
  }
  if (cfg.grpo.epsilon <= 0.0 || cfg.grpo.epsilon >= 1.0) {
    return ConfigError{"grpo.epsilon must lie strictly between 0 and 1"};
  }
  if (cfg.grpo.beta_kl < 0.0) {
    return ConfigError{"grpo.beta_kl must be nonnegative"};
  }
  if (cfg.grpo.group_size < 2 || cfg.grpo.std_floor <= 0.0) {
    return ConfigError{"grpo.group_size must be at least 2 and grpo.std_floor positive"};
  }
  if (cfg.filter.max_prompt_tokens < 1) {
    return ConfigError{"filter.max_prompt_tokens must be at least 1"};
  }
  for (const auto& [dim, threshold] : cfg.filter.min_scores) {
    if (threshold < 0.0 || threshold > 1.0) {
      return ConfigError{"filter threshold for '" + dim + "' must lie in [0, 1]"};
    }
  }
  return std::nullopt;
}

/// Full assembly: defaults, then the optional config file, then environment
/// variables, then explicit flag overrides (already dotted keys).
inline Expected<CliConfig, ConfigError> build_config(
    const std::optional<std::string>& config_path,
    const std::map<std::string, std::string>& flag_overrides) {
  CliConfig cfg;
  if (config_path) {
    auto file = load_config_file(*config_path);
    if (!file.ok()) return file.error();
    if (auto error = apply_settings(cfg, file.value())) return *error;
  }
  apply_environment(cfg);
  if (auto error = apply_settings(cfg, flag_overrides)) return *error;
  if (auto error = validate(cfg)) return *error;
  return cfg;
}

}  // namespace gensearch::config
