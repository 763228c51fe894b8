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

#include "curry/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace curry {

namespace {

// Independent generator streams so that changing one corruption rate does not
// perturb the frames or the other corruption draw.
enum Stream : std::uint64_t {
  kStreamGeometry = 1,
  kStreamFrames = 2,
  kStreamMislabel = 3,
  kStreamDegrade = 4,
  kStreamEpoch = 5,
  kStreamAugment = 6,
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

std::size_t corrupted_count(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
}

std::vector<double> unit_vector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (;;) {
    for (double& x : v) x = normal(rng);
    if (norm(v) > 1e-6) return l2_normalize(v);
  }
}

// Orthonormal basis of a random rank-r subspace of R^f (columns of an f x r matrix).
DenseMatrix nuisance_basis(std::size_t f, std::size_t r, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> cols;
  while (cols.size() < r) {
    std::vector<double> v(f);
    for (double& x : v) x = normal(rng);
    for (const auto& c : cols) {
      const double p = dot(v, c);
      for (std::size_t i = 0; i < f; ++i) v[i] -= p * c[i];
    }
    if (norm(v) > 1e-6) cols.push_back(l2_normalize(v));
  }
  DenseMatrix basis(f, r);
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t i = 0; i < f; ++i) basis(i, j) = cols[j][i];
  }
  return basis;
}

struct SpeakerModel {
  std::vector<double> identity;
  std::vector<std::vector<double>> conditions;
};

SpeakerModel make_speaker(const WorldConfig& cfg, const DenseMatrix& basis,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SpeakerModel s;
  s.identity = unit_vector(cfg.frame_dim, rng);
  const std::size_t r = basis.cols();
  const double coef = r > 0 ? cfg.condition_scale / std::sqrt(static_cast<double>(r)) : 0.0;
  for (std::size_t q = 0; q < cfg.conditions_per_speaker; ++q) {
    std::vector<double> offset(cfg.frame_dim, 0.0);
    for (std::size_t j = 0; j < r; ++j) {
      const double z = coef * normal(rng);
      for (std::size_t i = 0; i < cfg.frame_dim; ++i) offset[i] += z * basis(i, j);
    }
    s.conditions.push_back(std::move(offset));
  }
  return s;
}

Utterance make_utterance(const WorldConfig& cfg, const SpeakerModel& spk,
                         std::size_t speaker, std::size_t condition,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Utterance u;
  u.label = speaker;
  u.true_label = speaker;
  u.condition = condition;
  u.frames = DenseMatrix(cfg.frames_per_utt, cfg.frame_dim);
  for (std::size_t t = 0; t < cfg.frames_per_utt; ++t) {
    for (std::size_t i = 0; i < cfg.frame_dim; ++i) {
      u.frames(t, i) = spk.identity[i] + spk.conditions[condition][i] +
                       cfg.cluster_spread * normal(rng);
    }
  }
  return u;
}

}  // namespace

void WorldConfig::validate() const {
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(mislabel_rate)) {
    throw ConfigError(fmt::format("world.mislabel_rate = {} outside [0, 1]", mislabel_rate));
  }
  if (!rate_ok(degrade_rate)) {
    throw ConfigError(fmt::format("world.degrade_rate = {} outside [0, 1]", degrade_rate));
  }
  if (num_speakers < 2) throw ConfigError("world.num_speakers must be at least 2");
  if (frames_per_utt < 1) throw ConfigError("world.frames_per_utt must be at least 1");
  if (frame_dim < 1) throw ConfigError("world.frame_dim must be at least 1");
  if (conditions_per_speaker < 1) {
    throw ConfigError("world.conditions_per_speaker must be at least 1");
  }
  if (utts_per_speaker < 1) throw ConfigError("world.utts_per_speaker must be at least 1");
  if (nuisance_rank > frame_dim) {
    throw ConfigError("world.nuisance_rank cannot exceed world.frame_dim");
  }
  if (num_groups < 1) throw ConfigError("world.num_groups must be at least 1");
  if (!(degrade_noise_sigma >= 0.0) || !(cluster_spread >= 0.0) || !(condition_scale >= 0.0)) {
    throw ConfigError("world noise scales must be non-negative");
  }
}

std::size_t SpeakerWorld::mislabeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(train.begin(), train.end(), [](const Utterance& u) { return u.mislabeled; }));
}

std::size_t SpeakerWorld::degraded_count() const {
  return static_cast<std::size_t>(
      std::count_if(train.begin(), train.end(), [](const Utterance& u) { return u.degraded; }));
}

SpeakerWorld generate_world(const WorldConfig& cfg) {
  cfg.validate();
  SpeakerWorld world;
  world.config = cfg;

  auto geo = make_rng(cfg.seed, kStreamGeometry);
  const DenseMatrix basis = nuisance_basis(cfg.frame_dim, cfg.nuisance_rank, geo);
  std::vector<SpeakerModel> speakers;
  for (std::size_t s = 0; s < cfg.num_speakers + cfg.heldout_speakers; ++s) {
    speakers.push_back(make_speaker(cfg, basis, geo));
  }

  auto frames_rng = make_rng(cfg.seed, kStreamFrames);
  for (std::size_t s = 0; s < cfg.num_speakers; ++s) {
    for (std::size_t j = 0; j < cfg.utts_per_speaker; ++j) {
      world.train.push_back(make_utterance(cfg, speakers[s], s,
                                           j % cfg.conditions_per_speaker, frames_rng));
    }
  }
  for (std::size_t h = 0; h < cfg.heldout_speakers; ++h) {
    for (std::size_t j = 0; j < cfg.utts_per_speaker; ++j) {
      world.heldout.push_back(make_utterance(cfg, speakers[cfg.num_speakers + h], h,
                                             j % cfg.conditions_per_speaker, frames_rng));
    }
    world.heldout_group.push_back(h % cfg.num_groups);
  }

  const std::size_t n = world.train.size();
  std::vector<std::size_t> ids(n);

  std::iota(ids.begin(), ids.end(), 0);
  auto mis_rng = make_rng(cfg.seed, kStreamMislabel);
  std::shuffle(ids.begin(), ids.end(), mis_rng);
  std::uniform_int_distribution<std::size_t> other(0, cfg.num_speakers - 2);
  for (std::size_t k = 0; k < corrupted_count(cfg.mislabel_rate, n); ++k) {
    Utterance& u = world.train[ids[k]];
    std::size_t pick = other(mis_rng);
    if (pick >= u.true_label) ++pick;
    u.label = pick;
    u.mislabeled = true;
  }

  std::iota(ids.begin(), ids.end(), 0);
  auto deg_rng = make_rng(cfg.seed, kStreamDegrade);
  std::shuffle(ids.begin(), ids.end(), deg_rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < corrupted_count(cfg.degrade_rate, n); ++k) {
    Utterance& u = world.train[ids[k]];
    for (double& v : u.frames.data()) v += cfg.degrade_noise_sigma * normal(deg_rng);
    u.degraded = true;
  }
  return world;
}

std::vector<std::size_t> sample_epoch(const SpeakerWorld& world, std::size_t epoch,
                                      std::size_t utts_per_speaker_cap) {
  std::vector<std::vector<std::size_t>> by_label(world.config.num_speakers);
  for (std::size_t i = 0; i < world.train.size(); ++i) {
    by_label[world.train[i].label].push_back(i);
  }
  auto rng = make_rng(world.config.seed, kStreamEpoch, epoch);
  std::vector<std::size_t> order;
  for (auto& ids : by_label) {
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t take = std::min(utts_per_speaker_cap, ids.size());
    order.insert(order.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order,
                                                   std::size_t batch_size, bool drop_last) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    if (drop_last && end - i < batch_size && !out.empty()) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

FrameBatch gather_frames(std::span<const Utterance> pool, std::span<const std::size_t> ids) {
  if (ids.empty()) throw ShapeError("gather_frames: empty selection");
  const std::size_t t = pool[ids[0]].frames.rows();
  const std::size_t f = pool[ids[0]].frames.cols();
  DenseMatrix values(ids.size() * t, f);
  for (std::size_t n = 0; n < ids.size(); ++n) {
    const auto& src = pool[ids[n]].frames.data();
    std::copy(src.begin(), src.end(), values.data().begin() + static_cast<std::ptrdiff_t>(n * t * f));
  }
  return FrameBatch(ids.size(), t, std::move(values));
}

std::vector<std::size_t> gather_labels(std::span<const Utterance> pool,
                                       std::span<const std::size_t> ids) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(pool[id].label);
  return out;
}

GaussianNoiseSource::GaussianNoiseSource(std::uint64_t seed, std::uint64_t epoch,
                                         std::uint64_t utt)
    : rng_(make_rng(seed, kStreamAugment, epoch, utt)) {}

double GaussianNoiseSource::draw_sigma(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng_);
}

double GaussianNoiseSource::draw_normal() { return normal_(rng_); }

void augment_gaussian(DenseMatrix& frames, NoiseSource& noise, const AugmentConfig& cfg) {
  if (!cfg.enabled) return;
  const double sigma = noise.draw_sigma(cfg.sigma_min, cfg.sigma_max);
  for (double& v : frames.data()) v += sigma * noise.draw_normal();
}

}  // namespace curry
