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

#include "curry/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

namespace curry {

TrialSet build_trials(std::span<const Utterance> pool,
                      std::span<const std::size_t> speaker_group,
                      std::size_t pairs_per_speaker, std::uint64_t seed) {
  std::set<std::size_t> speakers;
  for (const auto& u : pool) speakers.insert(u.true_label);
  if (speakers.size() < 2) {
    throw ProtocolError(
        fmt::format("build_trials: need at least 2 speakers, got {}", speakers.size()));
  }
  auto group_of = [&](std::size_t spk) -> std::size_t {
    return speaker_group.empty() ? 0 : speaker_group[spk];
  };

  std::vector<std::pair<std::size_t, std::size_t>> targets, nontargets;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      const std::size_t si = pool[i].true_label;
      const std::size_t sj = pool[j].true_label;
      if (si == sj) {
        targets.emplace_back(i, j);
      } else if (group_of(si) == group_of(sj)) {
        nontargets.emplace_back(i, j);
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::shuffle(targets.begin(), targets.end(), rng);
  std::shuffle(nontargets.begin(), nontargets.end(), rng);
  const std::size_t requested = pairs_per_speaker * speakers.size();
  const std::size_t want_target = std::min(targets.size(), requested / 2);
  const std::size_t want_nontarget = std::min(nontargets.size(), requested - requested / 2);

  TrialSet out;
  auto push = [&](std::pair<std::size_t, std::size_t> p, bool is_target) {
    out.pairs.push_back({p.first, p.second, is_target,
                         fmt::format("g{}", group_of(pool[p.first].true_label))});
  };
  for (std::size_t k = 0; k < want_target; ++k) push(targets[k], true);
  for (std::size_t k = 0; k < want_nontarget; ++k) push(nontargets[k], false);
  std::shuffle(out.pairs.begin(), out.pairs.end(), rng);
  return out;
}

TrialSet build_trials(const SpeakerWorld& world, std::size_t pairs_per_speaker,
                      std::uint64_t seed) {
  return build_trials(world.heldout, world.heldout_group, pairs_per_speaker, seed);
}

double cosine_score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_score: length mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) {
    throw DegenerateError("cosine_score: degenerate embedding");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

ScoreSet score_trials(const TrialSet& trials, const DenseMatrix& embeddings) {
  ScoreSet out;
  out.scores.reserve(trials.pairs.size());
  for (const Trial& t : trials.pairs) {
    if (t.a >= embeddings.rows() || t.b >= embeddings.rows()) {
      throw ShapeError("score_trials: utterance id without embedding");
    }
    out.scores.push_back(cosine_score(embeddings.row(t.a), embeddings.row(t.b)));
    out.target.push_back(t.target);
  }
  return out;
}

std::vector<OperatingPoint> roc_points(const ScoreSet& scores) {
  if (scores.scores.size() != scores.target.size()) {
    throw ShapeError("roc_points: score / label length mismatch");
  }
  std::vector<std::size_t> order(scores.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.scores[a] < scores.scores[b];
  });
  std::size_t n_target = 0;
  for (bool t : scores.target) n_target += t ? 1 : 0;
  const std::size_t n_nontarget = scores.target.size() - n_target;
  if (n_target == 0 || n_nontarget == 0) {
    throw MetricError("roc: need at least one target and one non-target trial");
  }
  const double nt = static_cast<double>(n_target);
  const double nn = static_cast<double>(n_nontarget);

  std::vector<OperatingPoint> out;
  const double lowest = scores.scores[order.front()];
  out.push_back({lowest - 1.0, 1.0, 0.0});
  // Walk distinct values; after consuming every score <= v, the next threshold
  // rejects exactly those.
  std::size_t rejected_target = 0, rejected_nontarget = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double v = scores.scores[order[i]];
    while (i < order.size() && scores.scores[order[i]] == v) {
      if (scores.target[order[i]]) {
        ++rejected_target;
      } else {
        ++rejected_nontarget;
      }
      ++i;
    }
    const double next = i < order.size() ? (v + scores.scores[order[i]]) / 2.0 : v + 1.0;
    out.push_back({next, static_cast<double>(n_nontarget - rejected_nontarget) / nn,
                   static_cast<double>(rejected_target) / nt});
  }
  return out;
}

EerResult compute_eer(const ScoreSet& scores) {
  const auto roc = roc_points(scores);
  for (std::size_t j = 1; j < roc.size(); ++j) {
    const double d = roc[j].frr - roc[j].far;
    if (d < 0.0) continue;
    if (d == 0.0) return {roc[j].frr, roc[j].threshold};
    const OperatingPoint& lo = roc[j - 1];
    const OperatingPoint& hi = roc[j];
    const double d_lo = lo.frr - lo.far;
    const double t = d_lo / (d_lo - d);
    return {lo.far + t * (hi.far - lo.far), lo.threshold + t * (hi.threshold - lo.threshold)};
  }
  return {roc.back().frr, roc.back().threshold};
}

double compute_min_dcf(const ScoreSet& scores, const DcfParams& params) {
  const auto roc = roc_points(scores);
  const double miss_weight = params.c_miss * params.p_target;
  const double fa_weight = params.c_fa * (1.0 - params.p_target);
  const double norm_factor = std::min(miss_weight, fa_weight);
  if (!(norm_factor > 0.0)) throw MetricError("min_dcf: degenerate cost parameters");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& op : roc) {
    best = std::min(best, miss_weight * op.frr + fa_weight * op.far);
  }
  return best / norm_factor;
}

std::map<std::string, GroupMetrics> grouped_metrics(const TrialSet& trials,
                                                    const DenseMatrix& embeddings,
                                                    const DcfParams& params) {
  std::map<std::string, TrialSet> slices;
  for (const Trial& t : trials.pairs) slices[t.group].pairs.push_back(t);
  std::map<std::string, GroupMetrics> out;
  for (const auto& [key, slice] : slices) {
    const ScoreSet s = score_trials(slice, embeddings);
    GroupMetrics g;
    g.count = slice.pairs.size();
    const bool has_target = std::find(s.target.begin(), s.target.end(), true) != s.target.end();
    const bool has_nontarget =
        std::find(s.target.begin(), s.target.end(), false) != s.target.end();
    if (has_target && has_nontarget) {
      g.eer = compute_eer(s).eer;
      g.min_dcf = compute_min_dcf(s, params);
    }
    out.emplace(key, g);
  }
  return out;
}

std::string render_scores_csv(const TrialSet& trials, const ScoreSet& scores) {
  if (trials.pairs.size() != scores.scores.size()) {
    throw ShapeError("render_scores_csv: trial / score length mismatch");
  }
  std::string out = "a,b,score,target,group\n";
  for (std::size_t i = 0; i < trials.pairs.size(); ++i) {
    const Trial& t = trials.pairs[i];
    out += fmt::format("{},{},{},{},{}\n", t.a, t.b, scores.scores[i], t.target ? 1 : 0, t.group);
  }
  return out;
}

}  // namespace curry
