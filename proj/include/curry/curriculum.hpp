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

// Online difficulty curriculum.
//
// Running statistics of the batch target logits split every batch into
// Easy / Medium / Hard tiers; each tier's loss is scaled by a weight taken
// from softmax(gamma). A three-phase schedule fixes gamma in the first two
// phases and makes it learnable in the third.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "curry/numcore.hpp"

namespace curry {

class EmptyBatchError : public Error {
 public:
  using Error::Error;
};

struct BatchMoments {
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by n)
};

struct RunningStats {
  double mu_hat = 0.0;
  double sigma_hat = 1.0;
  double momentum = 0.01;
};

// EMA update of (mu_hat, sigma_hat) toward the batch moments of s. Returns the
// batch moments used.
BatchMoments update_running_stats(RunningStats& stats, std::span<const double> s);

enum class Tier { kEasy = 0, kMedium = 1, kHard = 2 };

std::string to_string(Tier tier);

// Easy iff s > mu+sigma, Hard iff s < mu-sigma, Medium otherwise.
Tier assign_tier(double s, const RunningStats& stats);
std::vector<Tier> assign_tiers(std::span<const double> s, const RunningStats& stats);

struct TierFractions {
  double easy = 0.0;
  double medium = 0.0;
  double hard = 0.0;
};
TierFractions tier_fractions(std::span<const Tier> tiers);

enum class Phase { kNone = 0, kI = 1, kII = 2, kIII = 3 };

std::string to_string(Phase phase);

using TierWeights = std::array<double, 3>;  // indexed by Tier

struct PhaseSchedule {
  std::size_t phase1_end = 2;
  std::size_t phase2_end = 4;
  std::array<double, 3> gamma_phase1 = {4.0, -4.0, -4.0};
  std::array<double, 3> gamma_phase2 = {2.0, 2.0, -4.0};
  std::array<double, 3> margin_per_phase = {0.2, 0.3, 0.35};

  void validate() const;
};

class CurriculumState {
 public:
  CurriculumState();

  // Curriculum logits in (easy, medium, hard) order, stored as a 1x3 parameter.
  Parameter& gamma() { return gamma_; }
  const Parameter& gamma() const { return gamma_; }

  bool learnable() const { return learnable_; }
  Phase phase() const { return phase_; }

  void set_gamma(const std::array<double, 3>& g);
  void set_learnable(bool on) { learnable_ = on; }
  void set_phase(Phase p) { phase_ = p; }

 private:
  Parameter gamma_;
  bool learnable_ = false;
  Phase phase_ = Phase::kNone;
};

TierWeights tier_weights(const CurriculumState& state);

// Moves the state to the phase owning `epoch` and returns that epoch's margin.
// Entering Phase III seeds the learnable gamma from gamma_phase2; later calls
// inside Phase III leave the learned gamma untouched.
double phase_schedule(std::size_t epoch, const PhaseSchedule& sched,
                      CurriculumState& state);

struct CurryLossResult {
  double loss = 0.0;
  std::vector<double> sample_weights;  // w_i
  // dLoss/dL_i = w_i / |B|; tier weights are treated as constants here.
  std::vector<double> d_losses;
};

// (1/|B|) * sum_i w_{tier(i)} * L_i. When the state is learnable the gamma
// gradient (with L_i held as values) is accumulated into state.gamma().grad.
CurryLossResult curry_loss(std::span<const double> losses, std::span<const Tier> tiers,
                           CurriculumState& state);

}  // namespace curry
