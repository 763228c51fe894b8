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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "curry/eval.hpp"

namespace curry {
namespace {

ScoreSet make_scores(std::vector<double> targets, std::vector<double> nontargets) {
  ScoreSet s;
  for (double v : targets) {
    s.scores.push_back(v);
    s.target.push_back(true);
  }
  for (double v : nontargets) {
    s.scores.push_back(v);
    s.target.push_back(false);
  }
  return s;
}

ScoreSet random_scores(std::size_t n, std::mt19937_64& rng, bool with_ties) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  ScoreSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const bool t = i == 0 ? true : (i == 1 ? false : coin(rng));
    double v = normal(rng) + (t ? 0.8 : 0.0);
    if (with_ties) v = std::round(v * 4.0) / 4.0;
    s.scores.push_back(v);
    s.target.push_back(t);
  }
  return s;
}

// Independent sweep: thresholds below, between and above the distinct scores;
// accept when score > threshold; FAR/FRR counted directly at every threshold.
struct Sweep {
  std::vector<double> thresholds, far, frr;
};

Sweep brute_sweep(const ScoreSet& s) {
  std::set<double> distinct(s.scores.begin(), s.scores.end());
  std::vector<double> v(distinct.begin(), distinct.end());
  Sweep out;
  out.thresholds.push_back(v.front() - 1.0);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) out.thresholds.push_back((v[i] + v[i + 1]) / 2);
  out.thresholds.push_back(v.back() + 1.0);
  for (double th : out.thresholds) {
    double fa = 0, nn = 0, miss = 0, nt = 0;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      const bool accept = s.scores[i] > th;
      if (s.target[i]) {
        ++nt;
        miss += accept ? 0 : 1;
      } else {
        ++nn;
        fa += accept ? 1 : 0;
      }
    }
    out.far.push_back(fa / nn);
    out.frr.push_back(miss / nt);
  }
  return out;
}

double brute_eer(const ScoreSet& s) {
  const Sweep w = brute_sweep(s);
  for (std::size_t j = 1; j < w.thresholds.size(); ++j) {
    const double d = w.frr[j] - w.far[j];
    if (d < 0) continue;
    if (d == 0) return w.frr[j];
    const double d_prev = w.frr[j - 1] - w.far[j - 1];
    const double t = d_prev / (d_prev - d);
    return w.far[j - 1] + t * (w.far[j] - w.far[j - 1]);
  }
  return w.frr.back();
}

double brute_min_dcf(const ScoreSet& s, const DcfParams& p) {
  const Sweep w = brute_sweep(s);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < w.thresholds.size(); ++j) {
    best = std::min(best, p.c_miss * p.p_target * w.frr[j] +
                              p.c_fa * (1 - p.p_target) * w.far[j]);
  }
  return best / std::min(p.c_miss * p.p_target, p.c_fa * (1 - p.p_target));
}

std::vector<Utterance> pool_of(std::size_t speakers, std::size_t per_speaker) {
  std::vector<Utterance> pool;
  for (std::size_t s = 0; s < speakers; ++s) {
    for (std::size_t j = 0; j < per_speaker; ++j) {
      Utterance u;
      u.true_label = s;
      u.label = (s + 1) % speakers;  // training labels must never be used
      pool.push_back(u);
    }
  }
  return pool;
}

// -- trials --

TEST(BuildTrials, TwoSpeakersTwoUtterancesEnumeratesAllPairs) {
  const auto pool = pool_of(2, 2);
  const TrialSet t = build_trials(pool, {}, 100, 1);
  std::size_t targets = 0, nontargets = 0;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const Trial& p : t.pairs) {
    EXPECT_LT(p.a, p.b);
    EXPECT_TRUE(seen.insert({p.a, p.b}).second);
    EXPECT_EQ(p.target, pool[p.a].true_label == pool[p.b].true_label);
    (p.target ? targets : nontargets) += 1;
  }
  EXPECT_EQ(targets, 2u);
  EXPECT_EQ(nontargets, 4u);
}

TEST(BuildTrials, SeededAndBalanced) {
  const auto pool = pool_of(10, 6);
  const TrialSet a = build_trials(pool, {}, 20, 5);
  const TrialSet b = build_trials(pool, {}, 20, 5);
  ASSERT_EQ(a.pairs.size(), b.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    EXPECT_EQ(a.pairs[i].a, b.pairs[i].a);
    EXPECT_EQ(a.pairs[i].b, b.pairs[i].b);
  }
  ASSERT_GE(a.pairs.size(), 100u);
  double targets = 0;
  for (const Trial& p : a.pairs) targets += p.target ? 1 : 0;
  const double frac = targets / a.pairs.size();
  EXPECT_GE(frac, 0.4);
  EXPECT_LE(frac, 0.6);
  const TrialSet c = build_trials(pool, {}, 20, 6);
  bool differs = false;
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    differs = differs || a.pairs[i].a != c.pairs[i].a || a.pairs[i].b != c.pairs[i].b;
  }
  EXPECT_TRUE(differs);
}

TEST(BuildTrials, FewerThanTwoSpeakersRejected) {
  EXPECT_THROW(build_trials(pool_of(1, 5), {}, 10, 1), ProtocolError);
}

TEST(BuildTrials, GroupKeysFollowSpeakers) {
  const auto pool = pool_of(6, 3);
  const std::vector<std::size_t> groups = {0, 1, 0, 1, 0, 1};
  const TrialSet t = build_trials(pool, groups, 30, 2);
  for (const Trial& p : t.pairs) {
    const std::size_t ga = groups[pool[p.a].true_label];
    EXPECT_EQ(ga, groups[pool[p.b].true_label]);
    EXPECT_EQ(p.group, "g" + std::to_string(ga));
  }
}

// -- scoring --

TEST(CosineScore, Examples) {
  const std::vector<double> a = {0.3, -1.2, 2.0};
  const std::vector<double> neg = {-0.3, 1.2, -2.0};
  EXPECT_DOUBLE_EQ(cosine_score(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cosine_score(a, neg), -1.0);
  EXPECT_THROW(cosine_score(a, std::vector<double>{0, 0, 0}), DegenerateError);
}

TEST(CosineScore, MatchesCosineMatrix) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    DenseMatrix a(1, 7), b(1, 7);
    for (double& v : a.data()) v = n(rng);
    for (double& v : b.data()) v = n(rng);
    EXPECT_NEAR(cosine_score(a.row(0), b.row(0)), cosine_matrix(a, b)(0, 0), 1e-15);
  }
}

// -- EER / minDCF --

TEST(Eer, SeparableIsZero) {
  EXPECT_EQ(compute_eer(make_scores({0.9, 0.8}, {0.1, 0.2})).eer, 0.0);
}

TEST(Eer, InvertedIsOne) { EXPECT_EQ(compute_eer(make_scores({0.1}, {0.9})).eer, 1.0); }

TEST(Eer, SingleClassRejected) {
  EXPECT_THROW(compute_eer(make_scores({0.1, 0.2}, {})), MetricError);
  EXPECT_THROW(compute_min_dcf(make_scores({}, {0.3}), DcfParams{}), MetricError);
}

TEST(Eer, MatchesBruteForceSweep) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 199;  // up to 200 pairs
    const ScoreSet s = random_scores(n, rng, trial % 3 == 0);
    const double eer = compute_eer(s).eer;
    EXPECT_EQ(eer, brute_eer(s)) << "trial " << trial;
    EXPECT_GE(eer, 0.0);
    EXPECT_LE(eer, 1.0);
  }
}

TEST(Eer, FiftyPairExample) {
  std::mt19937_64 rng(50);
  const ScoreSet s = random_scores(50, rng, false);
  EXPECT_EQ(compute_eer(s).eer, brute_eer(s));
}

TEST(Eer, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const ScoreSet s = random_scores(80, rng, trial % 2 == 0);
    ScoreSet affine = s, squashed = s;
    for (double& v : affine.scores) v = 3.0 * v + 1.0;
    for (double& v : squashed.scores) v = std::atan(v);
    const double base = compute_eer(s).eer;
    EXPECT_DOUBLE_EQ(compute_eer(affine).eer, base);
    EXPECT_DOUBLE_EQ(compute_eer(squashed).eer, base);
  }
}

TEST(Eer, LabelSwapGivesComplement) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const ScoreSet s = random_scores(12 + trial % 30, rng, trial % 4 == 0);
    ScoreSet swapped = s;
    for (std::size_t i = 0; i < swapped.target.size(); ++i) swapped.target[i] = !s.target[i];
    const double eer = brute_eer(s);
    EXPECT_NEAR(brute_eer(swapped), 1.0 - eer, 1e-12);
    EXPECT_NEAR(compute_eer(swapped).eer, 1.0 - compute_eer(s).eer, 1e-12);
  }
}

TEST(Eer, ThresholdSitsAtCrossing) {
  const EerResult r = compute_eer(make_scores({0.6, 0.9, 0.3}, {0.1, 0.5, 0.2}));
  double fa = 0, miss = 0;
  for (double v : {0.1, 0.5, 0.2}) fa += v > r.threshold ? 1 : 0;
  for (double v : {0.6, 0.9, 0.3}) miss += v > r.threshold ? 0 : 1;
  EXPECT_NEAR(fa / 3.0, r.eer, 1.0 / 3.0 + 1e-12);
  EXPECT_NEAR(miss / 3.0, r.eer, 1.0 / 3.0 + 1e-12);
}

TEST(MinDcf, SeparableIsZero) {
  EXPECT_EQ(compute_min_dcf(make_scores({0.9, 0.8}, {0.1, 0.2}), DcfParams{}), 0.0);
}

TEST(MinDcf, IdenticalScoresGiveOne) {
  EXPECT_NEAR(compute_min_dcf(make_scores({0.5, 0.5, 0.5}, {0.5, 0.5}), DcfParams{}), 1.0,
              1e-12);
}

TEST(MinDcf, MatchesBruteForceSweep) {
  std::mt19937_64 rng(10);
  const DcfParams params[] = {{0.01, 1, 1}, {0.05, 1, 1}, {0.5, 2, 1}, {0.2, 1, 10}};
  for (int trial = 0; trial < 200; ++trial) {
    const ScoreSet s = random_scores(2 + trial % 199, rng, trial % 3 == 1);
    for (const DcfParams& p : params) {
      const double dcf = compute_min_dcf(s, p);
      EXPECT_NEAR(dcf, brute_min_dcf(s, p), 1e-12) << "trial " << trial;
      EXPECT_GE(dcf, 0.0);
      EXPECT_LE(dcf, 1.0 + 1e-12);
    }
  }
}

// -- grouped metrics --

struct Fixture {
  TrialSet trials;
  DenseMatrix embeddings;
};

Fixture grouped_fixture(const std::vector<std::size_t>& groups) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t speakers = groups.size();
  const auto pool = pool_of(speakers, 5);
  Fixture f;
  f.embeddings = DenseMatrix(pool.size(), 6);
  std::vector<std::vector<double>> centers(speakers, std::vector<double>(6));
  for (auto& c : centers) {
    for (double& v : c) v = n(rng);
  }
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      f.embeddings(i, j) = centers[pool[i].true_label][j] + 0.9 * n(rng);
    }
  }
  f.trials = build_trials(pool, groups, 20, 3);
  return f;
}

TEST(GroupedMetrics, SingleGroupMatchesUngrouped) {
  const Fixture f = grouped_fixture({0, 0, 0, 0, 0, 0});
  const auto g = grouped_metrics(f.trials, f.embeddings, DcfParams{});
  ASSERT_EQ(g.size(), 1u);
  const ScoreSet s = score_trials(f.trials, f.embeddings);
  const GroupMetrics& only = g.begin()->second;
  EXPECT_EQ(only.count, f.trials.pairs.size());
  EXPECT_EQ(*only.eer, compute_eer(s).eer);
  EXPECT_EQ(*only.min_dcf, compute_min_dcf(s, DcfParams{}));
}

TEST(GroupedMetrics, EmptyKeyIsOneImplicitGroup) {
  Fixture f = grouped_fixture({0, 1, 0, 1, 0, 1});
  for (Trial& t : f.trials.pairs) t.group.clear();
  const auto g = grouped_metrics(f.trials, f.embeddings, DcfParams{});
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.begin()->second.count, f.trials.pairs.size());
}

TEST(GroupedMetrics, DisjointGroupsMatchTheirSlices) {
  const Fixture f = grouped_fixture({0, 1, 0, 1, 0, 1, 1, 0});
  const auto g = grouped_metrics(f.trials, f.embeddings, DcfParams{});
  ASSERT_EQ(g.size(), 2u);
  for (const auto& [key, m] : g) {
    TrialSet slice;
    for (const Trial& t : f.trials.pairs) {
      if (t.group == key) slice.pairs.push_back(t);
    }
    const ScoreSet s = score_trials(slice, f.embeddings);
    EXPECT_EQ(m.count, slice.pairs.size());
    ASSERT_TRUE(m.eer.has_value());
    EXPECT_EQ(*m.eer, brute_eer(s));
    EXPECT_NEAR(*m.min_dcf, brute_min_dcf(s, DcfParams{}), 1e-12);
  }
}

TEST(GroupedMetrics, SingleClassGroupIsUndefined) {
  Fixture f = grouped_fixture({0, 0, 0, 0});
  for (Trial& t : f.trials.pairs) t.group = t.target ? "targets_only" : "mixed";
  const auto g = grouped_metrics(f.trials, f.embeddings, DcfParams{});
  ASSERT_TRUE(g.count("targets_only"));
  EXPECT_FALSE(g.at("targets_only").eer.has_value());
  EXPECT_FALSE(g.at("targets_only").min_dcf.has_value());
}

TEST(ScoresCsv, OneRowPerTrial) {
  const Fixture f = grouped_fixture({0, 1, 0, 1});
  const ScoreSet s = score_trials(f.trials, f.embeddings);
  const std::string csv = render_scores_csv(f.trials, s);
  EXPECT_EQ(csv.rfind("a,b,score,target,group\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')),
            f.trials.pairs.size() + 1);
}

}  // namespace
}  // namespace curry
