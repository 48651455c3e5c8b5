// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Training configuration and its flat `key = value` file format. Lines
// starting with '#' are comments; string values may be double-quoted.

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "vtm/errors.hpp"
#include "vtm/model.hpp"
#include "vtm/objectives.hpp"

namespace vtm {

enum class Preset { spnlg, wiki };

struct TrainConfig {
  Mode mode = Mode::vtm;
  Lambdas lambda{1.0, 1.0, 1.0};

  int word_dim = 300;
  int hidden = 300;
  int table_hidden = 300;
  int z_dim = 64;
  int c_dim = 100;
  int max_position = kDefaultMaxPosition;

  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  int batch_paired = 32;
  int batch_raw = 32;
  int max_epochs = 30;
  int patience = 5;
  int kl_warmup_steps = 0;  // 0 disables warm-up
  std::uint64_t seed = 1;
  int min_count = 2;
  int max_length = kDefaultMaxLength;
  double raw_fraction = 1.0;  // share of the raw file used for training

  std::string paired_path;
  std::string raw_path;
  std::string valid_path;
  std::string output_dir = "run";

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void apply_preset(TrainConfig& c, Preset p) {
  c.word_dim = c.hidden = c.table_hidden = 300;
  if (p == Preset::spnlg) {
    c.lambda = {1.0, 1.0, 1.0};
    c.z_dim = 64;
    c.c_dim = 100;
  } else {
    c.lambda = {0.5, 1.0, 0.5};
    c.z_dim = 100;
    c.c_dim = 200;
  }
}

inline TrainConfig preset_config(Preset p) {
  TrainConfig c;
  apply_preset(c, p);
  return c;
}

inline Preset parse_preset(std::string_view s) {
  if (s == "spnlg") return Preset::spnlg;
  if (s == "wiki") return Preset::wiki;
  throw ConfigError("unknown preset '" + std::string(s) + "' (expected spnlg or wiki)");
}

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (c.batch_paired < 1 || c.batch_raw < 1) throw ConfigError("batch sizes must be >= 1");
  if (c.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (c.patience < 1) throw ConfigError("patience must be >= 1");
  if (c.min_count < 1) throw ConfigError("min_count must be >= 1");
  if (c.max_length < 1) throw ConfigError("max_length must be >= 1");
  if (c.kl_warmup_steps < 0) throw ConfigError("kl_warmup_steps must be >= 0");
  if (c.clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
  if (c.raw_fraction < 0.0 || c.raw_fraction > 1.0) throw ConfigError("raw_fraction must be in [0, 1]");
  if (c.lambda.mi < 0 || c.lambda.pt < 0 || c.lambda.pc < 0) throw ConfigError("lambda weights must be >= 0");
  if (c.word_dim < 1 || c.hidden < 1 || c.table_hidden < 1 || c.z_dim < 1 || c.c_dim < 1 || c.max_position < 1) {
    throw ConfigError("model dimensions must be >= 1");
  }
}

inline ModelDims model_dims(const TrainConfig& c, int word_vocab, int field_vocab) {
  ModelDims d;
  d.word_vocab = word_vocab;
  d.field_vocab = field_vocab;
  d.word_dim = c.word_dim;
  d.hidden = c.hidden;
  d.table_hidden = c.table_hidden;
  d.z_dim = c.z_dim;
  d.c_dim = c.c_dim;
  d.max_position = c.max_position;
  return d;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = std::stod(std::string(v), &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("invalid number for '" + std::string(key) + "': " + std::string(v));
    }
  } else {
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("invalid integer for '" + std::string(key) + "': " + std::string(v));
    }
  }
  return out;
}

}  // namespace detail

// Sets one field from its textual form. Unknown keys are errors.
inline void set_config_value(TrainConfig& c, std::string_view key, std::string_view raw) {
  std::string_view v = detail::trim(raw);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  using detail::parse_number;
  if (key == "preset") apply_preset(c, parse_preset(v));
  else if (key == "mode") c.mode = parse_mode(v);
  else if (key == "lambda_mi") c.lambda.mi = parse_number<double>(key, v);
  else if (key == "lambda_pt") c.lambda.pt = parse_number<double>(key, v);
  else if (key == "lambda_pc") c.lambda.pc = parse_number<double>(key, v);
  else if (key == "word_dim") c.word_dim = parse_number<int>(key, v);
  else if (key == "hidden") c.hidden = parse_number<int>(key, v);
  else if (key == "table_hidden") c.table_hidden = parse_number<int>(key, v);
  else if (key == "z_dim") c.z_dim = parse_number<int>(key, v);
  else if (key == "c_dim") c.c_dim = parse_number<int>(key, v);
  else if (key == "max_position") c.max_position = parse_number<int>(key, v);
  else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, v);
  else if (key == "clip_norm") c.clip_norm = parse_number<double>(key, v);
  else if (key == "batch_paired") c.batch_paired = parse_number<int>(key, v);
  else if (key == "batch_raw") c.batch_raw = parse_number<int>(key, v);
  else if (key == "max_epochs") c.max_epochs = parse_number<int>(key, v);
  else if (key == "patience") c.patience = parse_number<int>(key, v);
  else if (key == "kl_warmup_steps") c.kl_warmup_steps = parse_number<int>(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "min_count") c.min_count = parse_number<int>(key, v);
  else if (key == "max_length") c.max_length = parse_number<int>(key, v);
  else if (key == "raw_fraction") c.raw_fraction = parse_number<double>(key, v);
  else if (key == "paired") c.paired_path = std::string(v);
  else if (key == "raw") c.raw_path = std::string(v);
  else if (key == "valid") c.valid_path = std::string(v);
  else if (key == "output_dir") c.output_dir = std::string(v);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

// Key/value pairs in file order. A `preset` line is applied first wherever it
// appears, so explicit keys always override it.
inline std::vector<std::pair<std::string, std::string>> read_config_entries(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (s.front() == '[') continue;  // section headers carry no meaning
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key(detail::trim(s.substr(0, eq)));
    std::string value(detail::trim(s.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  std::stable_partition(out.begin(), out.end(), [](const auto& kv) { return kv.first == "preset"; });
  return out;
}

inline TrainConfig parse_config(std::istream& in, TrainConfig base = {}) {
  for (const auto& [k, v] : read_config_entries(in)) set_config_value(base, k, v);
  validate(base);
  return base;
}

inline TrainConfig parse_config_string(const std::string& text, TrainConfig base = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

// Loads a config file; relative data paths are resolved against the file's
// directory.
inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  TrainConfig c = parse_config(in, std::move(base));
  const auto dir = path.parent_path();
  for (std::string* p : {&c.paired_path, &c.raw_path, &c.valid_path, &c.output_dir}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (dir / *p).lexically_normal().string();
  }
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{{"mode", std::string(mode_name(c.mode))},
                        {"lambda_mi", c.lambda.mi},
                        {"lambda_pt", c.lambda.pt},
                        {"lambda_pc", c.lambda.pc},
                        {"word_dim", c.word_dim},
                        {"hidden", c.hidden},
                        {"table_hidden", c.table_hidden},
                        {"z_dim", c.z_dim},
                        {"c_dim", c.c_dim},
                        {"max_position", c.max_position},
                        {"learning_rate", c.learning_rate},
                        {"clip_norm", c.clip_norm},
                        {"batch_paired", c.batch_paired},
                        {"batch_raw", c.batch_raw},
                        {"max_epochs", c.max_epochs},
                        {"patience", c.patience},
                        {"kl_warmup_steps", c.kl_warmup_steps},
                        {"seed", c.seed},
                        {"min_count", c.min_count},
                        {"max_length", c.max_length},
                        {"raw_fraction", c.raw_fraction},
                        {"paired", c.paired_path},
                        {"raw", c.raw_path},
                        {"valid", c.valid_path},
                        {"output_dir", c.output_dir}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.lambda = {j.at("lambda_mi").get<double>(), j.at("lambda_pt").get<double>(), j.at("lambda_pc").get<double>()};
  c.word_dim = j.at("word_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.table_hidden = j.at("table_hidden").get<int>();
  c.z_dim = j.at("z_dim").get<int>();
  c.c_dim = j.at("c_dim").get<int>();
  c.max_position = j.at("max_position").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.batch_paired = j.at("batch_paired").get<int>();
  c.batch_raw = j.at("batch_raw").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.kl_warmup_steps = j.at("kl_warmup_steps").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.min_count = j.at("min_count").get<int>();
  c.max_length = j.at("max_length").get<int>();
  c.raw_fraction = j.at("raw_fraction").get<double>();
  c.paired_path = j.at("paired").get<std::string>();
  c.raw_path = j.at("raw").get<std::string>();
  c.valid_path = j.at("valid").get<std::string>();
  c.output_dir = j.at("output_dir").get<std::string>();
  return c;
}

}  // namespace vtm
