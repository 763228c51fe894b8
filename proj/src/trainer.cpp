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

#include "curry/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace curry {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

EncoderConfig encoder_config(const RunConfig& cfg) {
  EncoderConfig e = cfg.encoder;
  e.frame_dim = cfg.world.frame_dim;
  return e;
}

Phase phase_for_epoch(std::size_t epoch, const PhaseSchedule& s) {
  if (epoch < s.phase1_end) return Phase::kI;
  if (epoch < s.phase2_end) return Phase::kII;
  return Phase::kIII;
}

}  // namespace

Model::Model(const RunConfig& cfg)
    : encoder(encoder_config(cfg), derive_seed(cfg.seed, 1)),
      bank(cfg.world.num_speakers, cfg.loss.subcenters, cfg.encoder.embed_dim,
           derive_seed(cfg.seed, 2)) {
  stats.momentum = cfg.loss.ema_momentum;
}

std::vector<Parameter*> Model::parameters() {
  auto out = encoder.parameters();
  out.push_back(&bank.weights());
  out.push_back(&curriculum.gamma());
  return out;
}

void Model::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

double apply_schedule(std::size_t epoch, const StepConfig& cfg, Model& model) {
  if (cfg.curriculum) return phase_schedule(epoch, cfg.schedule, model.curriculum);
  const Phase phase = phase_for_epoch(epoch, cfg.schedule);
  model.curriculum.set_phase(phase);
  model.curriculum.set_gamma({0.0, 0.0, 0.0});
  model.curriculum.set_learnable(false);
  return cfg.schedule.margin_per_phase[static_cast<std::size_t>(phase) - 1];
}

StepTrace forward_backward(const Batch& batch, Model& model, double margin,
                           const StepConfig& cfg, bool with_grad) {
  const MarginConfig margin_cfg{margin, cfg.scale};
  margin_cfg.validate();

  EncoderCache cache;
  const DenseMatrix embeddings =
      model.encoder.forward(batch.frames, Mode::kTrain, with_grad ? &cache : nullptr);
  if (!embeddings.all_finite()) throw NonFiniteError("non-finite embeddings");
  LogitBundle bundle = class_logits(embeddings, model.bank);

  StepTrace trace;
  trace.target_logits = target_logit(bundle, batch.labels);
  trace.moments = update_running_stats(model.stats, trace.target_logits);
  trace.tiers = assign_tiers(trace.target_logits, model.stats);
  trace.weights = tier_weights(model.curriculum);

  const DenseMatrix logits = margin_logits(bundle, batch.labels, margin_cfg);
  trace.sample_losses = per_sample_loss(logits, batch.labels);

  std::vector<double> d_losses;
  if (cfg.curriculum) {
    // Gamma gradient is only needed (and only accumulated) when learnable.
    CurryLossResult cr = curry_loss(trace.sample_losses, trace.tiers, model.curriculum);
    trace.loss = cr.loss;
    trace.sample_weights = std::move(cr.sample_weights);
    d_losses = std::move(cr.d_losses);
  } else {
    const double n = static_cast<double>(trace.sample_losses.size());
    for (double l : trace.sample_losses) trace.loss += l;
    trace.loss /= n;
    trace.sample_weights.assign(trace.sample_losses.size(), 1.0);
    d_losses.assign(trace.sample_losses.size(), 1.0 / n);
  }
  if (!std::isfinite(trace.loss)) throw NonFiniteError("non-finite training loss");
  if (!with_grad) return trace;

  const DenseMatrix d_logits = per_sample_loss_backward(logits, batch.labels, d_losses);
  const DenseMatrix d_cos = margin_logits_backward(bundle, batch.labels, margin_cfg, d_logits);
  DenseMatrix d_embeddings(embeddings.rows(), embeddings.cols());
  class_logits_backward(embeddings, model.bank, bundle, d_cos, &d_embeddings);
  model.encoder.backward(cache, d_embeddings);
  return trace;
}

StepResult train_step(const Batch& batch, std::size_t epoch, Model& model, AdamW& optimizer,
                      const StepConfig& cfg, const GroupRates& lr) {
  const double margin = apply_schedule(epoch, cfg, model);
  model.curriculum.gamma().frozen = !model.curriculum.learnable();
  model.zero_grad();

  StepResult out;
  out.trace = forward_backward(batch, model, margin, cfg, /*with_grad=*/true);
  out.loss = out.trace.loss;

  MetricRecord& r = out.record;
  r.epoch = epoch;
  r.phase = model.curriculum.phase();
  r.loss = out.loss;
  const TierFractions f = tier_fractions(out.trace.tiers);
  r.frac_easy = f.easy;
  r.frac_medium = f.medium;
  r.frac_hard = f.hard;
  r.mu_hat = model.stats.mu_hat;
  r.sigma_hat = model.stats.sigma_hat;
  r.w_easy = out.trace.weights[0];
  r.w_medium = out.trace.weights[1];
  r.w_hard = out.trace.weights[2];
  r.margin = margin;
  r.lr_backend = rate_for(lr, ParamGroup::kBackend);
  r.gamma_grad_norm = norm(model.curriculum.gamma().grad.data());

  optimizer.step(lr);
  model.bank.renormalize();
  return out;
}

AdamW make_optimizer(Model& model, const RunConfig& cfg) {
  AdamWConfig opt;
  opt.weight_decay = cfg.schedule.weight_decay;
  return AdamW(opt, model.parameters());
}

DenseMatrix embed_utterances(ToyEncoder& encoder, std::span<const Utterance> pool,
                             std::size_t chunk) {
  if (pool.empty()) return DenseMatrix(0, encoder.config().embed_dim);
  DenseMatrix out(pool.size(), encoder.config().embed_dim);
  std::vector<std::size_t> ids;
  for (std::size_t start = 0; start < pool.size(); start += chunk) {
    ids.clear();
    for (std::size_t i = start; i < std::min(pool.size(), start + chunk); ++i) ids.push_back(i);
    const DenseMatrix e = encoder.forward(gather_frames(pool, ids), Mode::kEval);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      std::copy(e.row(r).begin(), e.row(r).end(), out.row(start + r).begin());
    }
  }
  return out;
}

std::vector<double> score_target_logits(Model& model, std::span<const Utterance> pool,
                                        std::span<const std::size_t> ids) {
  std::vector<Utterance> subset;
  subset.reserve(ids.size());
  std::vector<std::size_t> labels;
  for (std::size_t id : ids) {
    subset.push_back(pool[id]);
    labels.push_back(pool[id].label);
  }
  const DenseMatrix e = embed_utterances(model.encoder, subset);
  return target_logit(e, labels, model.bank);
}

Evaluation evaluate(Model& model, const SpeakerWorld& world, const TrialSet& trials,
                    const DcfParams& dcf) {
  const DenseMatrix e = embed_utterances(model.encoder, world.heldout);
  const ScoreSet scores = score_trials(trials, e);
  return {compute_eer(scores), compute_min_dcf(scores, dcf)};
}

Trainer::Trainer(const RunConfig& cfg)
    : cfg_(cfg), model_(cfg), optimizer_(make_optimizer(model_, cfg)) {
  progress_.seed = cfg.seed;
  progress_.world_seed = cfg.world.seed;
}

TrainingLog run_training(Trainer& trainer, const SpeakerWorld& world,
                         const EpochObserver& observer) {
  const RunConfig& cfg = trainer.config();
  Model& model = trainer.model();
  if (world.config.num_speakers != cfg.world.num_speakers ||
      world.config.frame_dim != cfg.world.frame_dim) {
    throw ConfigError("run_training: world does not match the run configuration");
  }
  TrainingLog log;
  if (cfg.schedule.epochs == 0) return log;

  const StepConfig step_cfg{cfg.phase_schedule(), cfg.loss.scale, cfg.loss.curriculum};
  const TrialSet trials = build_trials(world, cfg.eval.pairs_per_speaker, cfg.seed);
  const AugmentConfig augment{cfg.schedule.augment, 0.001, 0.015};

  LrSchedule lr_schedule;
  lr_schedule.base_lr = cfg.schedule.lr;
  lr_schedule.warmup_epochs = cfg.schedule.warmup_epochs;
  lr_schedule.total_epochs = cfg.schedule.epochs;
  lr_schedule.steps_per_epoch =
      make_batches(sample_epoch(world, 0, cfg.schedule.utts_per_speaker_cap),
                   cfg.schedule.batch_size, /*drop_last=*/true)
          .size();

  TrainerProgress& progress = trainer.progress();
  MetricRecord last;
  for (std::size_t epoch = progress.epochs_done; epoch < cfg.schedule.epochs; ++epoch) {
    const auto order = sample_epoch(world, epoch, cfg.schedule.utts_per_speaker_cap);
    // A short tail batch skews the batch-norm statistics, so it is dropped.
    const auto batches = make_batches(order, cfg.schedule.batch_size, /*drop_last=*/true);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Batch batch{gather_frames(world.train, batches[b]),
                  gather_labels(world.train, batches[b])};
      const std::size_t row_block = batch.frames.time;
      for (std::size_t n = 0; n < batches[b].size(); ++n) {
        DenseMatrix frames(row_block, batch.frames.features());
        auto& data = batch.frames.values.data();
        const auto begin = data.begin() + static_cast<std::ptrdiff_t>(n * frames.size());
        std::copy(begin, begin + static_cast<std::ptrdiff_t>(frames.size()), frames.data().begin());
        GaussianNoiseSource noise(cfg.seed, epoch, batches[b][n]);
        augment_gaussian(frames, noise, augment);
        std::copy(frames.data().begin(), frames.data().end(), begin);
      }
      const GroupRates lr = lr_at(progress.global_step, lr_schedule);
      StepResult result;
      try {
        result = train_step(batch, epoch, model, trainer.optimizer(), step_cfg, lr);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError(fmt::format("epoch {} batch {}: {}", epoch, b, e.what()));
      }
      result.record.step = progress.global_step;
      last = result.record;
      if (progress.global_step % cfg.schedule.log_interval == 0) {
        log.records.push_back(result.record);
      }
      ++progress.global_step;
    }

    const Evaluation ev = evaluate(model, world, trials, cfg.eval.dcf);
    MetricRecord row = last;
    row.kind = "eval";
    row.epoch = epoch;
    row.eer = ev.eer.eer;
    row.min_dcf = ev.min_dcf;
    log.records.push_back(row);
    progress.epochs_done = epoch + 1;
    if (observer) observer(epoch, trainer);
  }
  return log;
}

}  // namespace curry
