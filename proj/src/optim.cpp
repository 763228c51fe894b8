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

#include "curry/optim.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace curry {

AdamW::AdamW(AdamWConfig cfg, std::vector<Parameter*> params)
    : cfg_(cfg), params_(std::move(params)) {
  moments_.reserve(params_.size());
  for (const Parameter* p : params_) {
    moments_.push_back({DenseMatrix(p->value.rows(), p->value.cols()),
                        DenseMatrix(p->value.rows(), p->value.cols()), 0});
  }
}

void AdamW::step(const GroupRates& lr) {
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    const Parameter& p = *params_[pi];
    if (p.frozen) continue;
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        throw NonFiniteError(
            fmt::format("optimizer: non-finite gradient {} in {}[{}]", p.grad[i], p.name, i));
      }
    }
  }
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Parameter& p = *params_[pi];
    if (p.frozen) continue;
    MomentState& st = moments_[pi];
    ++st.steps;
    const double rate = rate_for(lr, p.group);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(st.steps));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(st.steps));
    const double decay = p.decay ? rate * cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      st.first[i] = cfg_.beta1 * st.first[i] + (1.0 - cfg_.beta1) * g;
      st.second[i] = cfg_.beta2 * st.second[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = st.first[i] / bc1;
      const double v_hat = st.second[i] / bc2;
      const double old = p.value[i];
      p.value[i] = old - rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon) - decay * old;
    }
  }
}

double lr_at(std::size_t step, const LrSchedule& schedule, ParamGroup group) {
  const double base = rate_for(schedule.base_lr, group);
  const std::size_t warm = schedule.warmup_steps();
  const std::size_t total = schedule.total_steps();
  if (step < warm) {
    return base * static_cast<double>(step + 1) / static_cast<double>(warm);
  }
  if (total <= warm) return base;
  const double progress = std::min(
      1.0, static_cast<double>(step - warm) / static_cast<double>(total - warm));
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

GroupRates lr_at(std::size_t step, const LrSchedule& schedule) {
  GroupRates out{};
  for (std::size_t g = 0; g < kNumParamGroups; ++g) {
    out[g] = lr_at(step, schedule, static_cast<ParamGroup>(g));
  }
  return out;
}

}  // namespace curry
