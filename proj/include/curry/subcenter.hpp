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

// Sub-center angular-margin classification head.
//
// Each class owns K unit-norm prototypes. A sample's cosine to a class is the
// max over that class's prototypes; the value for the labeled class is the
// sample's confidence score (target logit). The additive angular margin is
// applied to that pooled target cosine before the scaled softmax.

#include <cstdint>
#include <span>
#include <vector>

#include "curry/numcore.hpp"

namespace curry {

class LabelError : public Error {
 public:
  using Error::Error;
};

struct MarginConfig {
  double margin = 0.2;  // radians
  double scale = 32.0;

  void validate() const;
};

class SubcenterBank {
 public:
  SubcenterBank(std::size_t num_classes, std::size_t num_subcenters, std::size_t dim,
                std::uint64_t seed);

  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_subcenters() const { return num_subcenters_; }
  std::size_t dim() const { return dim_; }

  // (C*K) x d; row c*K + k holds prototype k of class c.
  Parameter& weights() { return weights_; }
  const Parameter& weights() const { return weights_; }

  std::span<const double> prototype(std::size_t c, std::size_t k) const {
    return weights_.value.row(c * num_subcenters_ + k);
  }

  // Rescales every prototype row to unit norm.
  void renormalize();

 private:
  std::size_t num_classes_;
  std::size_t num_subcenters_;
  std::size_t dim_;
  Parameter weights_;
};

struct LogitBundle {
  DenseMatrix class_cosines;             // n x C, max over sub-centers
  std::vector<std::size_t> argmax;       // n x C dominant sub-center per entry
  std::vector<double> target;            // s_i, filled by target_logit
  std::vector<std::size_t> dominant;     // k* for the labeled class

  std::size_t dominant_for(std::size_t i, std::size_t c) const {
    return argmax[i * class_cosines.cols() + c];
  }
};

// Pooled cosine logits for every class. Ties go to the lowest sub-center.
LogitBundle class_logits(const DenseMatrix& embeddings, const SubcenterBank& bank);

// Fills bundle.target / bundle.dominant from the labeled class and returns
// the target logits. Throws LabelError for labels outside [0, C).
std::vector<double> target_logit(LogitBundle& bundle,
                                 std::span<const std::size_t> labels);

// Convenience: class_logits followed by target_logit.
std::vector<double> target_logit(const DenseMatrix& embeddings,
                                 std::span<const std::size_t> labels,
                                 const SubcenterBank& bank);

// Scaled logits with the additive angular margin on the labeled class. The
// margined target is s*cos(theta + m) while theta + m <= pi, otherwise the
// monotone fallback s*(cos(theta) - m*sin(m)).
DenseMatrix margin_logits(const LogitBundle& bundle,
                          std::span<const std::size_t> labels,
                          const MarginConfig& cfg);

// dL/dcos given dL/dlogits.
DenseMatrix margin_logits_backward(const LogitBundle& bundle,
                                   std::span<const std::size_t> labels,
                                   const MarginConfig& cfg,
                                   const DenseMatrix& upstream);

// Per-row cross entropy -log softmax(logits_i)[y_i].
std::vector<double> per_sample_loss(const DenseMatrix& logits,
                                    std::span<const std::size_t> labels);

// Gradient of sum_i upstream_i * L_i with respect to the logits.
DenseMatrix per_sample_loss_backward(const DenseMatrix& logits,
                                     std::span<const std::size_t> labels,
                                     std::span<const double> upstream);

// Routes dL/dcos (n x C) through the max-pooling onto the dominant
// prototypes and accumulates into d_embeddings and the bank gradient.
void class_logits_backward(const DenseMatrix& embeddings, SubcenterBank& bank,
                           const LogitBundle& bundle, const DenseMatrix& d_cos,
                           DenseMatrix* d_embeddings);

}  // namespace curry
