// Copyright 2026 The Curry Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "curry/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace curry {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(fmt::format("'{}' is not a number", v));
  }
  return out;
}

std::uint64_t parse_uint(std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(fmt::format("'{}' is not a non-negative integer", v));
  }
  return out;
}

bool parse_bool(std::string_view v) {
  v = trim(v);
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(fmt::format("'{}' is not on/off", v));
}

std::array<double, 3> parse_triple(std::string_view v) {
  std::array<double, 3> out{};
  std::size_t k = 0;
  while (true) {
    const auto comma = v.find(',');
    if (k >= 3) throw ConfigError("expected exactly 3 comma-separated numbers");
    out[k++] = parse_double(v.substr(0, comma));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (k != 3) throw ConfigError("expected exactly 3 comma-separated numbers");
  return out;
}

std::string fmt_num(double v) { return fmt::format("{}", v); }
std::string fmt_triple(const std::array<double, 3>& t) {
  return fmt::format("{}, {}, {}", t[0], t[1], t[2]);
}
std::string fmt_bool(bool b) { return b ? "on" : "off"; }

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Field>
KeySpec size_key(std::string name, Field field) {
  return {std::move(name),
          [field](RunConfig& c, std::string_view v) {
            std::invoke(field, c) = static_cast<std::size_t>(parse_uint(v));
          },
          [field](const RunConfig& c) {
            return fmt::format("{}", std::invoke(field, const_cast<RunConfig&>(c)));
          }};
}

template <typename Field>
KeySpec u64_key(std::string name, Field field) {
  return {std::move(name),
          [field](RunConfig& c, std::string_view v) { std::invoke(field, c) = parse_uint(v); },
          [field](const RunConfig& c) {
            return fmt::format("{}", std::invoke(field, const_cast<RunConfig&>(c)));
          }};
}

template <typename Field>
KeySpec double_key(std::string name, Field field) {
  return {std::move(name),
          [field](RunConfig& c, std::string_view v) { std::invoke(field, c) = parse_double(v); },
          [field](const RunConfig& c) {
            return fmt_num(std::invoke(field, const_cast<RunConfig&>(c)));
          }};
}

template <typename Field>
KeySpec bool_key(std::string name, Field field) {
  return {std::move(name),
          [field](RunConfig& c, std::string_view v) { std::invoke(field, c) = parse_bool(v); },
          [field](const RunConfig& c) {
            return fmt_bool(std::invoke(field, const_cast<RunConfig&>(c)));
          }};
}

template <typename Field>
KeySpec triple_key(std::string name, Field field) {
  return {std::move(name),
          [field](RunConfig& c, std::string_view v) { std::invoke(field, c) = parse_triple(v); },
          [field](const RunConfig& c) {
            return fmt_triple(std::invoke(field, const_cast<RunConfig&>(c)));
          }};
}

const std::vector<KeySpec>& registry() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    using C = RunConfig;
    k.push_back(size_key("world.num_speakers", [](C& c) -> auto& { return c.world.num_speakers; }));
    k.push_back(size_key("world.heldout_speakers", [](C& c) -> auto& { return c.world.heldout_speakers; }));
    k.push_back(size_key("world.conditions_per_speaker",
                         [](C& c) -> auto& { return c.world.conditions_per_speaker; }));
    k.push_back(size_key("world.frame_dim", [](C& c) -> auto& { return c.world.frame_dim; }));
    k.push_back(size_key("world.frames_per_utt", [](C& c) -> auto& { return c.world.frames_per_utt; }));
    k.push_back(size_key("world.utts_per_speaker", [](C& c) -> auto& { return c.world.utts_per_speaker; }));
    k.push_back(size_key("world.nuisance_rank", [](C& c) -> auto& { return c.world.nuisance_rank; }));
    k.push_back(size_key("world.num_groups", [](C& c) -> auto& { return c.world.num_groups; }));
    k.push_back(double_key("world.mislabel_rate", [](C& c) -> auto& { return c.world.mislabel_rate; }));
    k.push_back(double_key("world.degrade_rate", [](C& c) -> auto& { return c.world.degrade_rate; }));
    k.push_back(double_key("world.degrade_noise_sigma",
                           [](C& c) -> auto& { return c.world.degrade_noise_sigma; }));
    k.push_back(double_key("world.condition_scale", [](C& c) -> auto& { return c.world.condition_scale; }));
    k.push_back(double_key("world.cluster_spread", [](C& c) -> auto& { return c.world.cluster_spread; }));
    k.push_back(u64_key("world.seed", [](C& c) -> auto& { return c.world.seed; }));

    k.push_back(size_key("encoder.num_layers", [](C& c) -> auto& { return c.encoder.num_layers; }));
    k.push_back(size_key("encoder.hidden_dim", [](C& c) -> auto& { return c.encoder.hidden_dim; }));
    k.push_back(size_key("encoder.attention_dim", [](C& c) -> auto& { return c.encoder.attention_dim; }));
    k.push_back(size_key("encoder.embed_dim", [](C& c) -> auto& { return c.encoder.embed_dim; }));
    k.push_back(double_key("encoder.bn_momentum", [](C& c) -> auto& { return c.encoder.bn_momentum; }));

    k.push_back(size_key("loss.K", [](C& c) -> auto& { return c.loss.subcenters; }));
    k.push_back(double_key("loss.scale", [](C& c) -> auto& { return c.loss.scale; }));
    k.push_back(double_key("loss.margin_phase1", [](C& c) -> auto& { return c.loss.margin_per_phase[0]; }));
    k.push_back(double_key("loss.margin_phase2", [](C& c) -> auto& { return c.loss.margin_per_phase[1]; }));
    k.push_back(double_key("loss.margin_phase3", [](C& c) -> auto& { return c.loss.margin_per_phase[2]; }));
    k.push_back(bool_key("loss.curriculum", [](C& c) -> auto& { return c.loss.curriculum; }));
    k.push_back(triple_key("loss.gamma_phase1", [](C& c) -> auto& { return c.loss.gamma_phase1; }));
    k.push_back(triple_key("loss.gamma_phase2", [](C& c) -> auto& { return c.loss.gamma_phase2; }));
    k.push_back(double_key("loss.ema_momentum", [](C& c) -> auto& { return c.loss.ema_momentum; }));

    k.push_back(size_key("schedule.epochs", [](C& c) -> auto& { return c.schedule.epochs; }));
    k.push_back(size_key("schedule.phase1_end", [](C& c) -> auto& { return c.schedule.phase1_end; }));
    k.push_back(size_key("schedule.phase2_end", [](C& c) -> auto& { return c.schedule.phase2_end; }));
    k.push_back(size_key("schedule.warmup_epochs", [](C& c) -> auto& { return c.schedule.warmup_epochs; }));
    k.push_back(size_key("schedule.batch_size", [](C& c) -> auto& { return c.schedule.batch_size; }));
    k.push_back(size_key("schedule.utts_per_speaker_cap",
                         [](C& c) -> auto& { return c.schedule.utts_per_speaker_cap; }));
    k.push_back(double_key("schedule.lr_frontend", [](C& c) -> auto& { return c.schedule.lr[0]; }));
    k.push_back(double_key("schedule.lr_backend", [](C& c) -> auto& { return c.schedule.lr[1]; }));
    k.push_back(double_key("schedule.lr_classifier", [](C& c) -> auto& { return c.schedule.lr[2]; }));
    k.push_back(double_key("schedule.lr_gamma", [](C& c) -> auto& { return c.schedule.lr[3]; }));
    k.push_back(double_key("schedule.weight_decay", [](C& c) -> auto& { return c.schedule.weight_decay; }));
    k.push_back(size_key("schedule.log_interval", [](C& c) -> auto& { return c.schedule.log_interval; }));
    k.push_back(bool_key("schedule.augment", [](C& c) -> auto& { return c.schedule.augment; }));

    k.push_back(size_key("eval.pairs_per_speaker", [](C& c) -> auto& { return c.eval.pairs_per_speaker; }));
    k.push_back(double_key("eval.p_target", [](C& c) -> auto& { return c.eval.dcf.p_target; }));
    k.push_back(double_key("eval.c_miss", [](C& c) -> auto& { return c.eval.dcf.c_miss; }));
    k.push_back(double_key("eval.c_fa", [](C& c) -> auto& { return c.eval.dcf.c_fa; }));

    k.push_back(u64_key("seed", [](C& c) -> auto& { return c.seed; }));
    k.push_back({"output_dir",
                 [](C& c, std::string_view v) { c.output_dir = std::string(trim(v)); },
                 [](const C& c) { return c.output_dir; }});
    return k;
  }();
  return keys;
}

struct RawValue {
  std::string value;
  std::string where;  // "file:line" or "--set"
};

void split_assignment(std::string_view line, char sep, std::string& key, std::string& value,
                      const std::string& where) {
  const auto eq = line.find(sep);
  if (eq == std::string_view::npos) {
    throw ConfigError(fmt::format("{}: expected 'key {} value', got '{}'", where, sep, line));
  }
  key = std::string(trim(line.substr(0, eq)));
  value = std::string(trim(line.substr(eq + 1)));
  if (key.empty()) throw ConfigError(fmt::format("{}: empty key", where));
}

}  // namespace

void RunConfig::validate() const {
  world.validate();
  encoder.validate();
  if (encoder.frame_dim != world.frame_dim) {
    throw ConfigError("encoder frame dim must equal world.frame_dim");
  }
  if (loss.subcenters < 1) throw ConfigError("loss.K must be at least 1");
  if (!(loss.scale > 0.0)) throw ConfigError("loss.scale must be positive");
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(loss.margin_per_phase[i] >= 0.0 && loss.margin_per_phase[i] < 1.5707963267948966)) {
      throw ConfigError(fmt::format("loss.margin_phase{} = {} outside [0, pi/2)", i + 1,
                                    loss.margin_per_phase[i]));
    }
  }
  if (!(loss.ema_momentum >= 0.0 && loss.ema_momentum <= 1.0)) {
    throw ConfigError("loss.ema_momentum outside [0, 1]");
  }
  if (schedule.phase1_end > schedule.phase2_end) {
    throw ConfigError("schedule.phase1_end exceeds schedule.phase2_end");
  }
  if (schedule.batch_size == 0) throw ConfigError("schedule.batch_size must be positive");
  if (schedule.utts_per_speaker_cap == 0) {
    throw ConfigError("schedule.utts_per_speaker_cap must be positive");
  }
  if (schedule.log_interval == 0) throw ConfigError("schedule.log_interval must be positive");
  for (double r : schedule.lr) {
    if (!(r >= 0.0)) throw ConfigError("learning rates must be non-negative");
  }
  if (!(schedule.weight_decay >= 0.0)) throw ConfigError("schedule.weight_decay must be >= 0");
  if (!(eval.dcf.p_target > 0.0 && eval.dcf.p_target < 1.0)) {
    throw ConfigError("eval.p_target outside (0, 1)");
  }
  if (!(eval.dcf.c_miss > 0.0) || !(eval.dcf.c_fa > 0.0)) {
    throw ConfigError("eval costs must be positive");
  }
}

PhaseSchedule RunConfig::phase_schedule() const {
  PhaseSchedule s;
  s.phase1_end = schedule.phase1_end;
  s.phase2_end = schedule.phase2_end;
  s.gamma_phase1 = loss.gamma_phase1;
  s.gamma_phase2 = loss.gamma_phase2;
  s.margin_per_phase = loss.margin_per_phase;
  return s;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

RunConfig parse_config(std::string_view text, std::string_view source,
                       const std::vector<std::string>& overrides) {
  std::map<std::string, RawValue> raw;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string buffer;
  while (std::getline(in, buffer)) {
    ++line_no;
    std::string_view line = buffer;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = fmt::format("{}:{}", source, line_no);
    std::string key, value;
    split_assignment(line, '=', key, value, where);
    if (raw.count(key)) {
      throw ConfigError(fmt::format("{}: duplicate key '{}' (first at {})", where, key,
                                    raw[key].where));
    }
    raw[key] = {value, where};
  }
  for (const std::string& o : overrides) {
    std::string key, value;
    split_assignment(o, '=', key, value, "--set");
    raw[key] = {value, fmt::format("--set {}", o)};
  }

  const auto& keys = registry();
  for (const auto& [key, v] : raw) {
    const bool known = std::any_of(keys.begin(), keys.end(),
                                   [&](const KeySpec& k) { return k.name == key; });
    if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", v.where, key));
  }
  RunConfig cfg;
  for (const auto& k : keys) {
    const auto it = raw.find(k.name);
    if (it == raw.end()) {
      throw ConfigError(fmt::format("{}: missing required key '{}'", source, k.name));
    }
    try {
      k.set(cfg, it->second.value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}: key '{}': {}", it->second.where, k.name, e.what()));
    }
  }
  cfg.encoder.frame_dim = cfg.world.frame_dim;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, overrides);
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : registry()) out += fmt::format("{} = {}\n", k.name, k.get(cfg));
  return out;
}

std::string render_world_config(const WorldConfig& world) {
  RunConfig tmp;
  tmp.world = world;
  std::string out;
  for (const auto& k : registry()) {
    if (k.name.rfind("world.", 0) == 0) out += fmt::format("{} = {}\n", k.name, k.get(tmp));
  }
  return out;
}

WorldConfig parse_world_config(std::string_view text, std::string_view source) {
  // Fill the non-world keys with defaults so the strict parser sees a full set.
  std::string full(text);
  if (!full.empty() && full.back() != '\n') full += '\n';
  const RunConfig defaults;
  for (const auto& k : registry()) {
    if (k.name.rfind("world.", 0) != 0) full += fmt::format("{} = {}\n", k.name, k.get(defaults));
  }
  return parse_config(full, source).world;
}

}  // namespace curry
