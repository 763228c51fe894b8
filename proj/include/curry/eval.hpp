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

// Verification metrics.
//
// Operating points: with the distinct scores v_1 < ... < v_m, the candidate
// thresholds are v_1 - 1, the midpoints (v_j + v_{j+1}) / 2 and v_m + 1. A
// trial is accepted when score >= threshold. EER is read off where
// FRR - FAR first becomes non-negative, interpolating linearly between the
// two adjacent operating points. minDCF is minimized over the same set.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curry/numcore.hpp"
#include "curry/synthdata.hpp"

namespace curry {

class ProtocolError : public Error {
 public:
  using Error::Error;
};
class MetricError : public Error {
 public:
  using Error::Error;
};

struct Trial {
  std::size_t a = 0;
  std::size_t b = 0;
  bool target = false;
  std::string group;
};

struct TrialSet {
  std::vector<Trial> pairs;
};

// Balanced target / non-target pairs over `pool`, using true labels. Non-target
// partners come from the same group bucket; speaker_group[s] is the bucket of
// speaker s (empty means one group). About pairs_per_speaker trials per speaker.
TrialSet build_trials(std::span<const Utterance> pool,
                      std::span<const std::size_t> speaker_group,
                      std::size_t pairs_per_speaker, std::uint64_t seed);
TrialSet build_trials(const SpeakerWorld& world, std::size_t pairs_per_speaker,
                      std::uint64_t seed);

double cosine_score(std::span<const double> a, std::span<const double> b);

struct ScoreSet {
  std::vector<double> scores;
  std::vector<bool> target;
};

// Cosine scores of every trial; `embeddings` rows are indexed by utterance id.
ScoreSet score_trials(const TrialSet& trials, const DenseMatrix& embeddings);

struct OperatingPoint {
  double threshold = 0.0;
  double far = 0.0;  // P(accept | non-target)
  double frr = 0.0;  // P(reject | target)
};

// Operating points in increasing threshold order. Throws MetricError unless
// both classes are present.
std::vector<OperatingPoint> roc_points(const ScoreSet& scores);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

EerResult compute_eer(const ScoreSet& scores);

struct DcfParams {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;
};

double compute_min_dcf(const ScoreSet& scores, const DcfParams& params);

struct GroupMetrics {
  std::optional<double> eer;      // empty when the group has one class only
  std::optional<double> min_dcf;
  std::size_t count = 0;
};

std::map<std::string, GroupMetrics> grouped_metrics(const TrialSet& trials,
                                                    const DenseMatrix& embeddings,
                                                    const DcfParams& params);

// One row per trial: a, b, score, target, group.
std::string render_scores_csv(const TrialSet& trials, const ScoreSet& scores);

}  // namespace curry
