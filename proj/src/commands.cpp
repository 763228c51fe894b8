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

#include "curry/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>

#include <fmt/format.h>

namespace curry {

std::string resolve_output_dir(const RunConfig& cfg) {
  const char* env = std::getenv(kOutputDirEnv);
  if (env != nullptr && *env != '\0') return env;
  return cfg.output_dir;
}

GenDataResult cmd_gen_data(const RunConfig& cfg, const std::string& out_path) {
  const SpeakerWorld world = generate_world(cfg.world);
  save_world(out_path, world);
  return {out_path, world.train.size(), world.heldout.size(), world.mislabeled_count(),
          world.degraded_count()};
}

SpeakerWorld load_world_for(const RunConfig& cfg, const std::string& path) {
  SpeakerWorld world = load_world(path);
  if (render_world_config(world.config) != render_world_config(cfg.world)) {
    throw ConfigError(fmt::format("{}: world settings differ from the run configuration", path));
  }
  return world;
}

TrainResult cmd_train(const RunConfig& cfg, const std::string& world_path,
                      const std::string& out_dir) {
  const SpeakerWorld world =
      world_path.empty() ? generate_world(cfg.world) : load_world_for(cfg, world_path);
  Trainer trainer(cfg);
  TrainResult out;
  out.log = run_training(trainer, world);
  const std::filesystem::path dir(out_dir);
  out.metrics_path = (dir / "metrics.csv").string();
  out.checkpoint_path = (dir / "checkpoint.bin").string();
  write_file_atomic(out.metrics_path, render_metrics_csv(out.log.records));
  save_checkpoint(out.checkpoint_path, trainer);
  return out;
}

EvalReport cmd_eval(Trainer& trainer, const SpeakerWorld& world, bool group_by) {
  const RunConfig& cfg = trainer.config();
  const TrialSet trials = build_trials(world, cfg.eval.pairs_per_speaker, cfg.seed);
  const DenseMatrix embeddings = embed_utterances(trainer.model().encoder, world.heldout);

  EvalReport out;
  const ScoreSet scores = score_trials(trials, embeddings);
  out.rows.push_back({"all", trials.pairs.size(), compute_eer(scores).eer,
                      compute_min_dcf(scores, cfg.eval.dcf)});
  if (group_by) {
    for (const auto& [key, g] : grouped_metrics(trials, embeddings, cfg.eval.dcf)) {
      out.rows.push_back({key, g.count, g.eer, g.min_dcf});
    }
  }
  out.scores_csv = render_scores_csv(trials, scores);
  return out;
}

std::string render_eval_csv(const std::vector<EvalRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
  std::string out = "group,trials,eer,min_dcf\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{}\n", r.group, r.trials, opt(r.eer), opt(r.min_dcf));
  }
  return out;
}

TierReport inspect_tiers(Trainer& trainer, const SpeakerWorld& world, TierStats source) {
  Model& model = trainer.model();
  std::vector<std::size_t> ids(world.train.size());
  std::iota(ids.begin(), ids.end(), 0);
  const std::vector<double> s = score_target_logits(model, world.train, ids);

  TierReport report;
  report.stats = model.stats;
  if (source == TierStats::kSet) {
    // A single EMA step with momentum 1 yields the population moments.
    report.stats.momentum = 1.0;
    update_running_stats(report.stats, s);
    report.stats.momentum = model.stats.momentum;
  }
  const std::vector<Tier> tiers = assign_tiers(s, report.stats);
  report.fractions = tier_fractions(tiers);

  std::size_t corrupted = 0, clean = 0, hard_corrupted = 0, hard_clean = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Utterance& u = world.train[i];
    TierRow row{i, u.label, u.true_label, s[i], tiers[i], u.mislabeled, u.degraded};
    const bool hard = row.tier == Tier::kHard;
    if (row.corrupted()) {
      ++corrupted;
      hard_corrupted += hard ? 1 : 0;
    } else {
      ++clean;
      hard_clean += hard ? 1 : 0;
    }
    report.rows.push_back(row);
  }
  if (corrupted > 0) report.p_hard_corrupted = static_cast<double>(hard_corrupted) / corrupted;
  if (clean > 0) report.p_hard_clean = static_cast<double>(hard_clean) / clean;
  return report;
}

std::string render_tier_csv(const TierReport& report) {
  std::string out = "id,label,true_label,s,tier,mislabeled,degraded,corrupted\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.id, r.label, r.true_label, r.target_logit,
                       to_string(r.tier), r.mislabeled, r.degraded, r.corrupted());
  }
  return out;
}

std::string render_tier_summary(const TierReport& report) {
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.4f}", *v) : std::string("n/a");
  };
  return fmt::format(
      "mu_hat={:.6f} sigma_hat={:.6f}\n"
      "easy={:.4f} medium={:.4f} hard={:.4f}\n"
      "P(hard|corrupted)={} P(hard|clean)={}\n",
      report.stats.mu_hat, report.stats.sigma_hat, report.fractions.easy,
      report.fractions.medium, report.fractions.hard, opt(report.p_hard_corrupted),
      opt(report.p_hard_clean));
}

}  // namespace curry
