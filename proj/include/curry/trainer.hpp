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

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curry/config.hpp"
#include "curry/curriculum.hpp"
#include "curry/encoder.hpp"
#include "curry/eval.hpp"
#include "curry/optim.hpp"
#include "curry/subcenter.hpp"
#include "curry/synthdata.hpp"

namespace curry {

// Everything that defines the network and the curriculum at a step boundary.
struct Model {
  ToyEncoder encoder;
  SubcenterBank bank;
  CurriculumState curriculum;
  RunningStats stats;

  explicit Model(const RunConfig& cfg);

  // Encoder parameters, then the bank, then gamma.
  std::vector<Parameter*> parameters();
  void zero_grad();
};

struct MetricRecord {
  std::string kind = "train";  // "train" or "eval"
  std::size_t epoch = 0;
  std::size_t step = 0;
  Phase phase = Phase::kNone;
  double loss = 0.0;
  double frac_easy = 0.0;
  double frac_medium = 0.0;
  double frac_hard = 0.0;
  double mu_hat = 0.0;
  double sigma_hat = 1.0;
  double w_easy = 0.0;
  double w_medium = 0.0;
  double w_hard = 0.0;
  double margin = 0.0;
  double lr_backend = 0.0;
  std::optional<double> eer;
  std::optional<double> min_dcf;
  double gamma_grad_norm = 0.0;
};

// Loss settings that stay fixed for a run.
struct StepConfig {
  PhaseSchedule schedule;
  double scale = 32.0;
  bool curriculum = true;
};

struct Batch {
  FrameBatch frames;
  std::vector<std::size_t> labels;
};

// Per-batch intermediate values produced by forward_backward.
struct StepTrace {
  double loss = 0.0;
  std::vector<double> target_logits;
  std::vector<double> sample_losses;
  std::vector<Tier> tiers;
  std::vector<double> sample_weights;
  BatchMoments moments;
  TierWeights weights{};
};

// Margin for `epoch` and, when the curriculum is on, the phase update of the
// curriculum state. Baseline runs keep gamma = 0 (uniform weights, frozen).
double apply_schedule(std::size_t epoch, const StepConfig& cfg, Model& model);

// Embed -> target logits -> running-stat update -> tiers -> weighted loss ->
// backward. Gradients are accumulated into the model (callers zero them).
// With `with_grad` false only the forward half runs. Baseline mode optimizes
// the plain mean per-sample loss.
StepTrace forward_backward(const Batch& batch, Model& model, double margin,
                           const StepConfig& cfg, bool with_grad = true);

struct StepResult {
  double loss = 0.0;
  MetricRecord record;
  StepTrace trace;
};

// One full curriculum training step: schedule, forward/backward, optimizer
// step with per-group rates, bank re-normalization.
StepResult train_step(const Batch& batch, std::size_t epoch, Model& model, AdamW& optimizer,
                      const StepConfig& cfg, const GroupRates& lr);

// Builds an optimizer over model.parameters() for the given run settings.
AdamW make_optimizer(Model& model, const RunConfig& cfg);

// Eval-mode embeddings for a list of utterances, in order.
DenseMatrix embed_utterances(ToyEncoder& encoder, std::span<const Utterance> pool,
                             std::size_t chunk = 256);

// Eval-mode target logits s_i of the given utterances against their labels.
std::vector<double> score_target_logits(Model& model, std::span<const Utterance> pool,
                                        std::span<const std::size_t> ids);

struct Evaluation {
  EerResult eer;
  double min_dcf = 0.0;
};

Evaluation evaluate(Model& model, const SpeakerWorld& world, const TrialSet& trials,
                    const DcfParams& dcf);

// Training state that must survive a checkpoint round-trip.
struct TrainerProgress {
  std::uint64_t global_step = 0;
  std::uint64_t epochs_done = 0;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;
};

// Owns the model and its optimizer; not copyable because the optimizer refers
// to the model's parameters.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const RunConfig& config() const { return cfg_; }
  Model& model() { return model_; }
  const Model& model() const { return model_; }
  AdamW& optimizer() { return optimizer_; }
  const AdamW& optimizer() const { return optimizer_; }
  TrainerProgress& progress() { return progress_; }
  const TrainerProgress& progress() const { return progress_; }

 private:
  RunConfig cfg_;
  Model model_;
  AdamW optimizer_;
  TrainerProgress progress_;
};

using EpochObserver = std::function<void(std::size_t epoch, Trainer& trainer)>;

struct TrainingLog {
  std::vector<MetricRecord> records;
};

// Runs every configured epoch on `world`. Per epoch: phase schedule, epoch
// resampling, one train_step per batch, then held-out evaluation. Throws
// NonFiniteError naming the epoch and batch on a non-finite loss.
TrainingLog run_training(Trainer& trainer, const SpeakerWorld& world,
                         const EpochObserver& observer = {});

}  // namespace curry
