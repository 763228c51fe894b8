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

// The work behind each CLI subcommand, kept out of main() so it can be tested.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curry/config.hpp"
#include "curry/io.hpp"
#include "curry/trainer.hpp"

namespace curry {

inline constexpr const char* kOutputDirEnv = "CURRY_OUTPUT_DIR";

// The environment variable wins over the configured directory.
std::string resolve_output_dir(const RunConfig& cfg);

struct GenDataResult {
  std::string path;
  std::size_t train_utterances = 0;
  std::size_t heldout_utterances = 0;
  std::size_t mislabeled = 0;
  std::size_t degraded = 0;
};

GenDataResult cmd_gen_data(const RunConfig& cfg, const std::string& out_path);

// Loads `path` and checks it was generated from the same world settings.
SpeakerWorld load_world_for(const RunConfig& cfg, const std::string& path);

struct TrainResult {
  std::string metrics_path;
  std::string checkpoint_path;
  TrainingLog log;
};

// Trains on the world at `world_path`, or on a freshly generated one when
// empty. Writes metrics.csv and checkpoint.bin under `out_dir`.
TrainResult cmd_train(const RunConfig& cfg, const std::string& world_path,
                      const std::string& out_dir);

struct EvalRow {
  std::string group;  // "all" for the pooled row
  std::size_t trials = 0;
  std::optional<double> eer;
  std::optional<double> min_dcf;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // pooled row first, then one per group
  std::string scores_csv;
};

EvalReport cmd_eval(Trainer& trainer, const SpeakerWorld& world, bool group_by);
std::string render_eval_csv(const std::vector<EvalRow>& rows);

enum class TierStats { kRunning, kSet };

struct TierRow {
  std::size_t id = 0;
  std::size_t label = 0;
  std::size_t true_label = 0;
  double target_logit = 0.0;
  Tier tier = Tier::kMedium;
  bool mislabeled = false;
  bool degraded = false;
  bool corrupted() const { return mislabeled || degraded; }
};

struct TierReport {
  std::vector<TierRow> rows;
  RunningStats stats;  // the thresholds actually used
  TierFractions fractions;
  std::optional<double> p_hard_corrupted;
  std::optional<double> p_hard_clean;
};

// Scores every training utterance of `world` in eval mode and tiers it with
// either the checkpoint's running statistics or statistics of the whole set.
TierReport inspect_tiers(Trainer& trainer, const SpeakerWorld& world, TierStats source);
std::string render_tier_csv(const TierReport& report);
std::string render_tier_summary(const TierReport& report);

}  // namespace curry
