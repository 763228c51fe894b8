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

#include "curry/subcenter.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

namespace curry {

namespace {

// sin(theta) is floored here so d cos(theta+m)/d cos(theta) stays bounded
// when an embedding sits exactly on its prototype.
constexpr double kMinSinSquared = 1e-12;

void check_labels(std::span<const std::size_t> labels, std::size_t n, std::size_t c) {
  if (labels.size() != n) {
    throw ShapeError(fmt::format("{} labels for {} samples", labels.size(), n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      throw LabelError(fmt::format("label {} at sample {} outside [0, {})", labels[i],
                                   i, c));
    }
  }
}

}  // namespace

void MarginConfig::validate() const {
  if (!(margin >= 0.0 && margin < std::numbers::pi / 2)) {
    throw Error(fmt::format("margin {} outside [0, pi/2)", margin));
  }
  if (!(scale > 0.0)) throw Error(fmt::format("scale {} must be positive", scale));
}

SubcenterBank::SubcenterBank(std::size_t num_classes, std::size_t num_subcenters,
                             std::size_t dim, std::uint64_t seed)
    : num_classes_(num_classes), num_subcenters_(num_subcenters), dim_(dim) {
  if (num_subcenters == 0) throw Error("SubcenterBank: K must be at least 1");
  if (num_classes == 0 || dim == 0) throw Error("SubcenterBank: empty bank");
  DenseMatrix w(num_classes * num_subcenters, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : w.data()) x = normal(rng);
  weights_ = Parameter("bank", std::move(w), ParamGroup::kClassifier);
  renormalize();
}

void SubcenterBank::renormalize() {
  for (std::size_t r = 0; r < weights_.value.rows(); ++r) {
    auto row = weights_.value.row(r);
    const auto u = l2_normalize(row);
    std::copy(u.begin(), u.end(), row.begin());
  }
}

LogitBundle class_logits(const DenseMatrix& embeddings, const SubcenterBank& bank) {
  if (embeddings.cols() != bank.dim()) {
    throw ShapeError(fmt::format("class_logits: embedding dim {} vs bank dim {}",
                                 embeddings.cols(), bank.dim()));
  }
  const DenseMatrix all = cosine_matrix(embeddings, bank.weights().value);
  const std::size_t n = embeddings.rows();
  const std::size_t c_count = bank.num_classes();
  const std::size_t k_count = bank.num_subcenters();

  LogitBundle out;
  out.class_cosines = DenseMatrix(n, c_count);
  out.argmax.assign(n * c_count, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < c_count; ++c) {
      std::size_t best = 0;
      double best_val = all(i, c * k_count);
      for (std::size_t k = 1; k < k_count; ++k) {
        const double v = all(i, c * k_count + k);
        if (v > best_val) {
          best_val = v;
          best = k;
        }
      }
      out.class_cosines(i, c) = best_val;
      out.argmax[i * c_count + c] = best;
    }
  }
  return out;
}

std::vector<double> target_logit(LogitBundle& bundle,
                                 std::span<const std::size_t> labels) {
  const std::size_t n = bundle.class_cosines.rows();
  check_labels(labels, n, bundle.class_cosines.cols());
  bundle.target.resize(n);
  bundle.dominant.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    bundle.target[i] = bundle.class_cosines(i, labels[i]);
    bundle.dominant[i] = bundle.dominant_for(i, labels[i]);
  }
  return bundle.target;
}

std::vector<double> target_logit(const DenseMatrix& embeddings,
                                 std::span<const std::size_t> labels,
                                 const SubcenterBank& bank) {
  // Label errors are reported before any compute.
  check_labels(labels, embeddings.rows(), bank.num_classes());
  LogitBundle bundle = class_logits(embeddings, bank);
  return target_logit(bundle, labels);
}

DenseMatrix margin_logits(const LogitBundle& bundle,
                          std::span<const std::size_t> labels,
                          const MarginConfig& cfg) {
  const DenseMatrix& cos = bundle.class_cosines;
  check_labels(labels, cos.rows(), cos.cols());
  const double m = cfg.margin;
  const double cos_m = std::cos(m);
  const double sin_m = std::sin(m);
  const double threshold = std::cos(std::numbers::pi - m);
  DenseMatrix out(cos.rows(), cos.cols());
  for (std::size_t i = 0; i < cos.rows(); ++i) {
    for (std::size_t c = 0; c < cos.cols(); ++c) out(i, c) = cfg.scale * cos(i, c);
    const double ct = cos(i, labels[i]);
    double margined;
    if (ct > threshold) {
      const double sin_t = std::sqrt(std::max(1.0 - ct * ct, 0.0));
      margined = ct * cos_m - sin_t * sin_m;
    } else {
      margined = ct - m * sin_m;
    }
    out(i, labels[i]) = cfg.scale * margined;
  }
  return out;
}

DenseMatrix margin_logits_backward(const LogitBundle& bundle,
                                   std::span<const std::size_t> labels,
                                   const MarginConfig& cfg,
                                   const DenseMatrix& upstream) {
  const DenseMatrix& cos = bundle.class_cosines;
  check_labels(labels, cos.rows(), cos.cols());
  const double m = cfg.margin;
  const double cos_m = std::cos(m);
  const double sin_m = std::sin(m);
  const double threshold = std::cos(std::numbers::pi - m);
  DenseMatrix out(cos.rows(), cos.cols());
  for (std::size_t i = 0; i < cos.rows(); ++i) {
    for (std::size_t c = 0; c < cos.cols(); ++c) out(i, c) = cfg.scale * upstream(i, c);
    const std::size_t y = labels[i];
    const double ct = cos(i, y);
    double slope = 1.0;
    if (ct > threshold && m != 0.0) {
      const double sin_t = std::sqrt(std::max(1.0 - ct * ct, kMinSinSquared));
      slope = cos_m + sin_m * ct / sin_t;
    }
    out(i, y) = cfg.scale * slope * upstream(i, y);
  }
  return out;
}

std::vector<double> per_sample_loss(const DenseMatrix& logits,
                                    std::span<const std::size_t> labels) {
  check_labels(labels, logits.rows(), logits.cols());
  std::vector<double> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double total = 0.0;
    for (double v : z) total += std::exp(v - mx);
    out[i] = std::max(0.0, mx + std::log(total) - z[labels[i]]);
  }
  return out;
}

DenseMatrix per_sample_loss_backward(const DenseMatrix& logits,
                                     std::span<const std::size_t> labels,
                                     std::span<const double> upstream) {
  check_labels(labels, logits.rows(), logits.cols());
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto p = softmax(logits.row(i));
    auto o = out.row(i);
    for (std::size_t c = 0; c < p.size(); ++c) o[c] = upstream[i] * p[c];
    o[labels[i]] -= upstream[i];
  }
  return out;
}

void class_logits_backward(const DenseMatrix& embeddings, SubcenterBank& bank,
                           const LogitBundle& bundle, const DenseMatrix& d_cos,
                           DenseMatrix* d_embeddings) {
  const std::size_t n = embeddings.rows();
  const std::size_t c_count = bank.num_classes();
  const std::size_t k_count = bank.num_subcenters();
  if (d_cos.rows() != n || d_cos.cols() != c_count) {
    throw ShapeError("class_logits_backward: gradient shape mismatch");
  }
  DenseMatrix scattered(n, c_count * k_count);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < c_count; ++c) {
      scattered(i, c * k_count + bundle.dominant_for(i, c)) = d_cos(i, c);
    }
  }
  cosine_matrix_backward(embeddings, bank.weights().value, scattered, d_embeddings,
                         &bank.weights().grad);
}

}  // namespace curry
