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

#pragma once

// Run configuration: flat `key = value` text with dotted section prefixes.
// Every key is required, unknown keys are rejected, and `#` starts a comment.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "curry/curriculum.hpp"
#include "curry/encoder.hpp"
#include "curry/eval.hpp"
#include "curry/optim.hpp"
#include "curry/synthdata.hpp"

namespace curry {

struct LossConfig {
  std::size_t subcenters = 3;
  double scale = 32.0;
  std::array<double, 3> margin_per_phase = {0.2, 0.3, 0.35};
  bool curriculum = true;
  std::array<double, 3> gamma_phase1 = {4.0, -4.0, -4.0};
  std::array<double, 3> gamma_phase2 = {2.0, 2.0, -4.0};
  double ema_momentum = 0.01;
};

struct ScheduleConfig {
  std::size_t epochs = 8;
  std::size_t phase1_end = 2;
  std::size_t phase2_end = 4;
  std::size_t warmup_epochs = 3;
  std::size_t batch_size = 32;
  std::size_t utts_per_speaker_cap = 5;
  GroupRates lr = {5e-6, 5e-5, 5e-5, 1e-3};  // frontend, backend, classifier, gamma
  double weight_decay = 1e-4;
  std::size_t log_interval = 1;
  bool augment = true;
};

struct EvalConfig {
  std::size_t pairs_per_speaker = 20;
  DcfParams dcf;
};

struct RunConfig {
  WorldConfig world;
  // frame_dim mirrors world.frame_dim.
  EncoderConfig encoder;
  LossConfig loss;
  ScheduleConfig schedule;
  EvalConfig eval;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  void validate() const;
  PhaseSchedule phase_schedule() const;
};

// Parses configuration text. `overrides` are `key=value` strings applied on top
// of the text before validation. Errors name the source, line and key.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>",
                       const std::vector<std::string>& overrides = {});

RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides = {});

// Canonical text form; parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& cfg);

// Only the world.* block, in canonical order.
std::string render_world_config(const WorldConfig& cfg);

// Parses a block holding only world.* keys.
WorldConfig parse_world_config(std::string_view text, std::string_view source = "<world>");

// Names of all recognized keys in canonical order.
std::vector<std::string> config_keys();

}  // namespace curry
