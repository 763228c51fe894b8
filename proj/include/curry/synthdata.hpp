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

// Synthetic speaker universe.
//
// Every speaker has a unit-norm identity vector in R^F and Q condition offsets
// drawn inside a nuisance subspace shared by all speakers. An utterance is T
// frames of (identity + condition offset + jitter). A fixed fraction of the
// training utterances is relabeled to another speaker and an independent
// fraction receives heavy isotropic noise. Held-out speakers are generated
// the same way, never corrupted, and are used only for verification trials.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "curry/encoder.hpp"
#include "curry/numcore.hpp"

namespace curry {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct WorldConfig {
  std::size_t num_speakers = 20;       // training classes C
  std::size_t heldout_speakers = 20;   // verification-only speakers
  std::size_t conditions_per_speaker = 3;
  std::size_t frame_dim = 16;
  std::size_t frames_per_utt = 8;
  std::size_t utts_per_speaker = 10;
  std::size_t nuisance_rank = 4;
  std::size_t num_groups = 1;          // synthetic demographic buckets
  double mislabel_rate = 0.0;
  double degrade_rate = 0.0;
  double degrade_noise_sigma = 1.5;
  double condition_scale = 1.0;
  double cluster_spread = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Utterance {
  DenseMatrix frames;  // T x F
  std::size_t label = 0;
  std::size_t true_label = 0;
  std::size_t condition = 0;
  bool mislabeled = false;
  bool degraded = false;
};

struct SpeakerWorld {
  WorldConfig config;
  std::vector<Utterance> train;
  std::vector<Utterance> heldout;
  // Group bucket per held-out speaker (index = true_label of held-out utterances).
  std::vector<std::size_t> heldout_group;

  std::size_t mislabeled_count() const;
  std::size_t degraded_count() const;
};

SpeakerWorld generate_world(const WorldConfig& cfg);

// Utterance ids for one epoch: for every training label, min(cap, available)
// utterances chosen by a (seed, epoch)-seeded draw, then globally shuffled.
std::vector<std::size_t> sample_epoch(const SpeakerWorld& world, std::size_t epoch,
                                      std::size_t utts_per_speaker_cap);

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order,
                                                   std::size_t batch_size,
                                                   bool drop_last = false);

// Stacks utterances into an encoder batch with their assigned labels.
FrameBatch gather_frames(std::span<const Utterance> pool,
                         std::span<const std::size_t> ids);
std::vector<std::size_t> gather_labels(std::span<const Utterance> pool,
                                       std::span<const std::size_t> ids);

// Source of per-utterance noise severity and unit Gaussian draws.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual double draw_sigma(double lo, double hi) = 0;
  virtual double draw_normal() = 0;
};

class GaussianNoiseSource final : public NoiseSource {
 public:
  explicit GaussianNoiseSource(std::uint64_t seed) : rng_(seed) {}
  GaussianNoiseSource(std::uint64_t seed, std::uint64_t epoch, std::uint64_t utt);
  double draw_sigma(double lo, double hi) override;
  double draw_normal() override;

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct AugmentConfig {
  bool enabled = true;
  double sigma_min = 0.001;
  double sigma_max = 0.015;
};

// Adds N(0, sigma^2) to every entry, sigma drawn once per utterance.
void augment_gaussian(DenseMatrix& frames, NoiseSource& noise, const AugmentConfig& cfg);

}  // namespace curry
