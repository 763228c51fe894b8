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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "curry/numcore.hpp"

namespace curry {

using GroupRates = std::array<double, kNumParamGroups>;  // indexed by ParamGroup

inline double& rate_for(GroupRates& r, ParamGroup g) {
  return r[static_cast<std::size_t>(g)];
}
inline double rate_for(const GroupRates& r, ParamGroup g) {
  return r[static_cast<std::size_t>(g)];
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

struct MomentState {
  DenseMatrix first;
  DenseMatrix second;
  std::uint64_t steps = 0;
};

// Adam with decoupled weight decay. Moment state is kept per parameter in
// registration order; frozen parameters are left untouched.
class AdamW {
 public:
  AdamW(AdamWConfig cfg, std::vector<Parameter*> params);

  // p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p (decay only when
  // p.decay). Throws NonFiniteError naming the parameter on a non-finite gradient.
  void step(const GroupRates& lr);

  const AdamWConfig& config() const { return cfg_; }
  std::span<Parameter* const> params() const { return params_; }
  std::vector<MomentState>& moments() { return moments_; }
  const std::vector<MomentState>& moments() const { return moments_; }

 private:
  AdamWConfig cfg_;
  std::vector<Parameter*> params_;
  std::vector<MomentState> moments_;
};

struct LrSchedule {
  GroupRates base_lr{};
  std::size_t warmup_epochs = 3;
  std::size_t total_epochs = 10;
  std::size_t steps_per_epoch = 1;

  std::size_t warmup_steps() const { return warmup_epochs * steps_per_epoch; }
  std::size_t total_steps() const { return total_epochs * steps_per_epoch; }
};

// Linear warmup base*(step+1)/warmup_steps, then half-cosine decay from base
// toward zero over the remaining steps.
double lr_at(std::size_t step, const LrSchedule& schedule, ParamGroup group);
GroupRates lr_at(std::size_t step, const LrSchedule& schedule);

}  // namespace curry
