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

#include "curry/curriculum.hpp"

#include <cmath>

#include <fmt/format.h>

namespace curry {

BatchMoments update_running_stats(RunningStats& stats, std::span<const double> s) {
  if (s.empty()) throw EmptyBatchError("update_running_stats: empty batch");
  BatchMoments b;
  for (double v : s) b.mean += v;
  b.mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (double v : s) var += (v - b.mean) * (v - b.mean);
  b.stddev = std::sqrt(var / static_cast<double>(s.size()));

  const double m = stats.momentum;
  stats.mu_hat = (1.0 - m) * stats.mu_hat + m * b.mean;
  stats.sigma_hat = (1.0 - m) * stats.sigma_hat + m * b.stddev;
  return b;
}

std::string to_string(Tier tier) {
  switch (tier) {
    case Tier::kEasy:
      return "easy";
    case Tier::kMedium:
      return "medium";
    case Tier::kHard:
      return "hard";
  }
  return "unknown";
}

Tier assign_tier(double s, const RunningStats& stats) {
  if (s > stats.mu_hat + stats.sigma_hat) return Tier::kEasy;
  if (s < stats.mu_hat - stats.sigma_hat) return Tier::kHard;
  return Tier::kMedium;
}

std::vector<Tier> assign_tiers(std::span<const double> s, const RunningStats& stats) {
  std::vector<Tier> out;
  out.reserve(s.size());
  for (double v : s) out.push_back(assign_tier(v, stats));
  return out;
}

TierFractions tier_fractions(std::span<const Tier> tiers) {
  TierFractions f;
  if (tiers.empty()) return f;
  std::array<std::size_t, 3> counts{};
  for (Tier t : tiers) ++counts[static_cast<std::size_t>(t)];
  const double n = static_cast<double>(tiers.size());
  f.easy = static_cast<double>(counts[0]) / n;
  f.medium = static_cast<double>(counts[1]) / n;
  f.hard = static_cast<double>(counts[2]) / n;
  return f;
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kNone:
      return "0";
    case Phase::kI:
      return "I";
    case Phase::kII:
      return "II";
    case Phase::kIII:
      return "III";
  }
  return "?";
}

void PhaseSchedule::validate() const {
  if (phase1_end > phase2_end) {
    throw Error(fmt::format("phase1_end {} exceeds phase2_end {}", phase1_end,
                            phase2_end));
  }
  for (double m : margin_per_phase) {
    if (!(m >= 0.0 && m < 1.5707963267948966)) {
      throw Error(fmt::format("phase margin {} outside [0, pi/2)", m));
    }
  }
}

CurriculumState::CurriculumState()
    : gamma_("gamma", DenseMatrix(1, 3), ParamGroup::kGamma, /*decay=*/false) {}

void CurriculumState::set_gamma(const std::array<double, 3>& g) {
  for (std::size_t i = 0; i < 3; ++i) gamma_.value[i] = g[i];
}

TierWeights tier_weights(const CurriculumState& state) {
  const auto p = softmax(state.gamma().value.data());
  return {p[0], p[1], p[2]};
}

double phase_schedule(std::size_t epoch, const PhaseSchedule& sched,
                      CurriculumState& state) {
  if (epoch < sched.phase1_end) {
    state.set_phase(Phase::kI);
    state.set_gamma(sched.gamma_phase1);
    state.set_learnable(false);
    return sched.margin_per_phase[0];
  }
  if (epoch < sched.phase2_end) {
    state.set_phase(Phase::kII);
    state.set_gamma(sched.gamma_phase2);
    state.set_learnable(false);
    return sched.margin_per_phase[1];
  }
  if (state.phase() != Phase::kIII) {
    state.set_gamma(sched.gamma_phase2);
    state.set_phase(Phase::kIII);
  }
  state.set_learnable(true);
  return sched.margin_per_phase[2];
}

CurryLossResult curry_loss(std::span<const double> losses, std::span<const Tier> tiers,
                           CurriculumState& state) {
  if (losses.size() != tiers.size()) {
    throw ShapeError(fmt::format("curry_loss: {} losses for {} tiers", losses.size(),
                                 tiers.size()));
  }
  if (losses.empty()) throw EmptyBatchError("curry_loss: empty batch");
  const TierWeights w = tier_weights(state);
  const double inv_n = 1.0 / static_cast<double>(losses.size());

  CurryLossResult out;
  out.sample_weights.resize(losses.size());
  out.d_losses.resize(losses.size());
  std::array<double, 3> tier_loss_sum{};
  double total = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const auto t = static_cast<std::size_t>(tiers[i]);
    out.sample_weights[i] = w[t];
    out.d_losses[i] = w[t] * inv_n;
    total += w[t] * losses[i];
    tier_loss_sum[t] += losses[i];
  }
  out.loss = total * inv_n;

  if (state.learnable()) {
    // loss = sum_t w_t * S_t / n with S_t the tier loss sums.
    std::array<double, 3> d_w{};
    for (std::size_t t = 0; t < 3; ++t) d_w[t] = tier_loss_sum[t] * inv_n;
    const auto d_gamma = softmax_backward(w, d_w);
    for (std::size_t t = 0; t < 3; ++t) state.gamma().grad[t] += d_gamma[t];
  }
  return out;
}

}  // namespace curry
