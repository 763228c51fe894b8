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

// curry: gen-data | train | eval | inspect-tiers

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "curry/commands.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitNonFinite = 3;

std::string in_dir(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

// Checkpoints carry their own configuration, so eval and inspect-tiers accept
// overrides only for the output directory and evaluation settings.
curry::RunConfig checkpoint_config(const curry::Trainer& trainer,
                                   const std::vector<std::string>& overrides) {
  return curry::parse_config(curry::render_config(trainer.config()), "checkpoint config",
                             overrides);
}

curry::SpeakerWorld world_for(const curry::RunConfig& cfg, const std::string& world_path) {
  return world_path.empty() ? curry::generate_world(cfg.world)
                            : curry::load_world_for(cfg, world_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curriculum-weighted sub-center margin training on synthetic speakers"};
  app.require_subcommand(1);

  std::string config_path, world_path, out_path, checkpoint_path, stats_source = "running";
  std::vector<std::string> overrides;
  bool group_by = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic world file");
  gen->add_option("-c,--config", config_path, "Run configuration")->required();
  gen->add_option("-o,--out", out_path, "World file path (default <output_dir>/world.bin)");
  gen->add_option("--set", overrides, "Override a config key: key=value");

  auto* train = app.add_subcommand("train", "Train and write metrics.csv + checkpoint.bin");
  train->add_option("-c,--config", config_path, "Run configuration")->required();
  train->add_option("-w,--world", world_path, "World file (generated inline when omitted)");
  train->add_option("--set", overrides, "Override a config key: key=value");

  auto* eval = app.add_subcommand("eval", "Held-out EER / minDCF of a checkpoint");
  eval->add_option("-k,--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval->add_option("-w,--world", world_path, "World file (regenerated when omitted)");
  eval->add_flag("--group-by", group_by, "Also report each group of trials");
  eval->add_option("--set", overrides, "Override a config key: key=value");

  auto* inspect = app.add_subcommand("inspect-tiers", "Per-utterance target logits and tiers");
  inspect->add_option("-k,--checkpoint", checkpoint_path, "Checkpoint file")->required();
  inspect->add_option("-w,--world", world_path, "World file (regenerated when omitted)");
  inspect->add_option("--stats", stats_source, "Tier thresholds: running | set")
      ->check(CLI::IsMember({"running", "set"}));
  inspect->add_option("-o,--out", out_path, "CSV path (default <output_dir>/tiers.csv)");
  inspect->add_option("--set", overrides, "Override a config key: key=value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const curry::RunConfig cfg = curry::load_config(config_path, overrides);
      const std::string path =
          out_path.empty() ? in_dir(curry::resolve_output_dir(cfg), "world.bin") : out_path;
      const auto r = curry::cmd_gen_data(cfg, path);
      fmt::print("wrote {}\ntrain utterances: {}\nheldout utterances: {}\nmislabeled: {}\n"
                 "degraded: {}\n",
                 r.path, r.train_utterances, r.heldout_utterances, r.mislabeled, r.degraded);
    } else if (train->parsed()) {
      const curry::RunConfig cfg = curry::load_config(config_path, overrides);
      const auto r = curry::cmd_train(cfg, world_path, curry::resolve_output_dir(cfg));
      for (const auto& rec : r.log.records) {
        if (rec.kind != "eval") continue;
        fmt::print("epoch {} phase {} loss {:.4f} eer {:.4f} min_dcf {:.4f}\n", rec.epoch,
                   curry::to_string(rec.phase), rec.loss, rec.eer.value_or(0.0),
                   rec.min_dcf.value_or(0.0));
      }
      fmt::print("wrote {}\nwrote {}\n", r.metrics_path, r.checkpoint_path);
    } else if (eval->parsed()) {
      auto trainer = curry::load_checkpoint(checkpoint_path);
      const curry::RunConfig cfg = checkpoint_config(*trainer, overrides);
      const curry::SpeakerWorld world = world_for(cfg, world_path);
      const auto report = curry::cmd_eval(*trainer, world, group_by);
      const std::string csv = curry::render_eval_csv(report.rows);
      const std::string dir = curry::resolve_output_dir(cfg);
      curry::write_file_atomic(in_dir(dir, "eval.csv"), csv);
      curry::write_file_atomic(in_dir(dir, "scores.csv"), report.scores_csv);
      fmt::print("{}", csv);
    } else if (inspect->parsed()) {
      auto trainer = curry::load_checkpoint(checkpoint_path);
      const curry::RunConfig cfg = checkpoint_config(*trainer, overrides);
      const curry::SpeakerWorld world = world_for(cfg, world_path);
      const auto report = curry::inspect_tiers(
          *trainer, world, stats_source == "set" ? curry::TierStats::kSet : curry::TierStats::kRunning);
      const std::string path =
          out_path.empty() ? in_dir(curry::resolve_output_dir(cfg), "tiers.csv") : out_path;
      curry::write_file_atomic(path, curry::render_tier_csv(report));
      fmt::print("wrote {}\n{}", path, curry::render_tier_summary(report));
    }
  } catch (const curry::NonFiniteError& e) {
    fmt::print(stderr, "error: training aborted: {}\n", e.what());
    return kExitNonFinite;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  }
  return 0;
}
