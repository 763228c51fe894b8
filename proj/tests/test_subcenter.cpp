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

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "curry/subcenter.hpp"

namespace curry {
namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = n(rng);
  return m;
}

std::vector<std::size_t> random_labels(std::size_t n, std::size_t c, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> u(0, c - 1);
  std::vector<std::size_t> out(n);
  for (auto& l : out) l = u(rng);
  return out;
}

double naive_cos(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

TEST(SubcenterBank, RowsAreUnitNorm) {
  SubcenterBank bank(7, 3, 5, 42);
  EXPECT_EQ(bank.weights().value.rows(), 21u);
  for (std::size_t r = 0; r < 21; ++r) EXPECT_NEAR(norm(bank.weights().value.row(r)), 1.0, 1e-12);
}

TEST(SubcenterBank, SeededInitIsDeterministic) {
  EXPECT_EQ(SubcenterBank(4, 2, 3, 9).weights().value, SubcenterBank(4, 2, 3, 9).weights().value);
  EXPECT_NE(SubcenterBank(4, 2, 3, 9).weights().value, SubcenterBank(4, 2, 3, 10).weights().value);
}

TEST(SubcenterBank, RenormalizeRestoresUnitRows) {
  SubcenterBank bank(3, 3, 4, 1);
  for (double& v : bank.weights().value.data()) v *= 3.7;
  bank.weights().value(2, 1) += 0.5;
  bank.renormalize();
  for (std::size_t r = 0; r < 9; ++r) EXPECT_NEAR(norm(bank.weights().value.row(r)), 1.0, 1e-12);
}

TEST(ClassLogits, AlignedWithSecondSubcenter) {
  // Class 0 prototypes are e1, e2, e3; class 1 is e4 (K=3 repeated).
  SubcenterBank bank(2, 3, 4, 0);
  DenseMatrix& w = bank.weights().value;
  w.fill(0.0);
  w(0, 0) = 1;
  w(1, 1) = 1;
  w(2, 2) = 1;
  for (std::size_t k = 3; k < 6; ++k) w(k, 3) = 1;
  const DenseMatrix e(1, 4, std::vector<double>{0, 1, 0, 0});
  LogitBundle b = class_logits(e, bank);
  const std::vector<std::size_t> y = {0};
  const auto s = target_logit(b, y);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_EQ(b.dominant[0], 1u);  // zero-based index of the second sub-center
}

TEST(ClassLogits, TiesGoToLowestSubcenter) {
  SubcenterBank bank(1, 3, 2, 0);
  DenseMatrix& w = bank.weights().value;
  w = DenseMatrix(3, 2, std::vector<double>{0, 1, 1, 0, 1, 0});
  const DenseMatrix e(1, 2, std::vector<double>{1, 0});
  const LogitBundle b = class_logits(e, bank);
  EXPECT_EQ(b.dominant_for(0, 0), 1u);
}

TEST(ClassLogits, SingleSubcenterIsPlainCosine) {
  std::mt19937_64 rng(2);
  SubcenterBank bank(5, 1, 6, 3);
  const DenseMatrix e = random_matrix(4, 6, rng);
  const LogitBundle b = class_logits(e, bank);
  const DenseMatrix plain = cosine_matrix(e, bank.weights().value);
  EXPECT_EQ(b.class_cosines, plain);
}

// Exhaustive sweep of small shapes against a triple loop.
TEST(ClassLogits, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(4);
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t c = 1; c <= 8; ++c) {
      for (std::size_t k = 1; k <= 8; ++k) {
        const std::size_t d = 1 + (n + c + k) % 6;
        SubcenterBank bank(c, k, d, n * 100 + c * 10 + k);
        const DenseMatrix e = random_matrix(n, d, rng);
        const auto labels = random_labels(n, c, rng);
        LogitBundle b = class_logits(e, bank);
        const auto s = target_logit(b, labels);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t cls = 0; cls < c; ++cls) {
            double best = -2.0;
            std::size_t arg = 0;
            for (std::size_t kk = 0; kk < k; ++kk) {
              const double v = std::clamp(naive_cos(e.row(i), bank.prototype(cls, kk)), -1.0, 1.0);
              if (v > best) {
                best = v;
                arg = kk;
              }
            }
            ASSERT_NEAR(b.class_cosines(i, cls), best, 1e-12);
            ASSERT_EQ(b.dominant_for(i, cls), arg);
          }
          ASSERT_EQ(s[i], b.class_cosines(i, labels[i]));
        }
      }
    }
  }
}

TEST(TargetLogit, OppositeOfEveryPrototypeIsMinusOne) {
  SubcenterBank bank(1, 3, 2, 0);
  bank.weights().value = DenseMatrix(3, 2, std::vector<double>{1, 0, 1, 0, 1, 0});
  const DenseMatrix e(1, 2, std::vector<double>{-2, 0});
  const std::vector<std::size_t> y = {0};
  EXPECT_DOUBLE_EQ(target_logit(e, y, bank)[0], -1.0);
}

TEST(TargetLogit, LabelOutOfRangeThrows) {
  SubcenterBank bank(3, 2, 4, 0);
  const DenseMatrix e(2, 4, 1.0);
  const std::vector<std::size_t> y = {0, 3};
  EXPECT_THROW(target_logit(e, y, bank), LabelError);
}

TEST(TargetLogit, ShapeMismatchThrows) {
  SubcenterBank bank(3, 2, 4, 0);
  EXPECT_THROW(class_logits(DenseMatrix(2, 5, 1.0), bank), ShapeError);
}

LogitBundle bundle_with_target(double cos_target) {
  LogitBundle b;
  b.class_cosines = DenseMatrix(1, 2, std::vector<double>{cos_target, 0.1});
  b.argmax.assign(2, 0);
  return b;
}

TEST(MarginLogits, AlignedTargetValue) {
  const std::vector<std::size_t> y = {0};
  const DenseMatrix z = margin_logits(bundle_with_target(1.0), y, {0.2, 32.0});
  EXPECT_NEAR(z(0, 0), 32.0 * std::cos(0.2), 1e-12);
  EXPECT_NEAR(z(0, 0), 31.3622, 1e-4);
  EXPECT_DOUBLE_EQ(z(0, 1), 3.2);
}

TEST(MarginLogits, ZeroMarginIsScaledCosine) {
  std::mt19937_64 rng(8);
  SubcenterBank bank(4, 3, 5, 1);
  const DenseMatrix e = random_matrix(6, 5, rng);
  const auto y = random_labels(6, 4, rng);
  LogitBundle b = class_logits(e, bank);
  const DenseMatrix z = margin_logits(b, y, {0.0, 32.0});
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(z[i], 32.0 * b.class_cosines[i]);
}

TEST(MarginLogits, FallbackBranch) {
  const std::vector<std::size_t> y = {0};
  const double m = 0.2;
  const DenseMatrix z = margin_logits(bundle_with_target(-0.999), y, {m, 32.0});
  EXPECT_NEAR(z(0, 0), 32.0 * (-0.999 - m * std::sin(m)), 1e-12);
  // Just above the switch point the regular formula applies.
  const double edge = std::cos(std::numbers::pi - m) + 1e-9;
  const DenseMatrix z2 = margin_logits(bundle_with_target(edge), y, {m, 1.0});
  EXPECT_NEAR(z2(0, 0), std::cos(std::acos(edge) + m), 1e-9);
}

TEST(MarginLogits, MonotoneInTargetCosine) {
  const std::vector<std::size_t> y = {0};
  double prev = -1e300;
  for (int i = 0; i <= 2000; ++i) {
    const double c = -1.0 + i * 0.001;
    const double z = margin_logits(bundle_with_target(c), y, {0.35, 32.0})(0, 0);
    EXPECT_GE(z, prev - 1e-9) << c;
    prev = z;
  }
}

TEST(PerSampleLoss, SaturatedCorrectIsZero) {
  const DenseMatrix z(1, 3, std::vector<double>{50, -50, -50});
  const std::vector<std::size_t> y = {0};
  EXPECT_NEAR(per_sample_loss(z, y)[0], 0.0, 1e-40);
}

TEST(PerSampleLoss, EqualLogitsGiveLogC) {
  const DenseMatrix z(2, 7, 3.25);
  const std::vector<std::size_t> y = {0, 6};
  for (double l : per_sample_loss(z, y)) EXPECT_NEAR(l, std::log(7.0), 1e-14);
}

TEST(PerSampleLoss, MatchesLongDoubleLogSumExp) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    DenseMatrix z = random_matrix(4, 6, rng);
    for (double& v : z.data()) v *= 20.0;
    const auto y = random_labels(4, 6, rng);
    const auto l = per_sample_loss(z, y);
    for (std::size_t i = 0; i < 4; ++i) {
      long double total = 0.0L;
      for (std::size_t c = 0; c < 6; ++c) total += std::exp(static_cast<long double>(z(i, c)));
      const long double ref = std::log(total) - static_cast<long double>(z(i, y[i]));
      EXPECT_NEAR(l[i], static_cast<double>(ref), 1e-12 * std::max(1.0, std::abs((double)ref)));
      EXPECT_GE(l[i], 0.0);
    }
  }
}

TEST(PerSampleLoss, SingleSubcenterNoMarginIsPlainCrossEntropy) {
  std::mt19937_64 rng(14);
  SubcenterBank bank(5, 1, 4, 2);
  const DenseMatrix e = random_matrix(8, 4, rng);
  const auto y = random_labels(8, 5, rng);
  LogitBundle b = class_logits(e, bank);
  const auto l = per_sample_loss(margin_logits(b, y, {0.0, 32.0}), y);
  for (std::size_t i = 0; i < 8; ++i) {
    double total = 0.0;
    double zt = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      const double z = 32.0 * naive_cos(e.row(i), bank.prototype(c, 0));
      total += std::exp(z);
      if (c == y[i]) zt = z;
    }
    EXPECT_NEAR(l[i], std::log(total) - zt, 1e-10);
  }
}

// mean(L) through margin, max-pooling and cosines, wrt embeddings and bank.
TEST(SubcenterGradient, MeanLossPassesGradCheck) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    SubcenterBank bank(4, 3, 5, 100 + trial);
    Parameter e("e", random_matrix(6, 5, rng), ParamGroup::kBackend);
    const auto y = random_labels(6, 4, rng);
    const MarginConfig cfg{0.3, 8.0};
    Objective f = [&](bool with_grad) {
      LogitBundle b = class_logits(e.value, bank);
      target_logit(b, y);
      const DenseMatrix z = margin_logits(b, y, cfg);
      const auto l = per_sample_loss(z, y);
      double mean = 0.0;
      for (double v : l) mean += v / 6.0;
      if (with_grad) {
        const std::vector<double> up(6, 1.0 / 6.0);
        const DenseMatrix dz = per_sample_loss_backward(z, y, up);
        const DenseMatrix dc = margin_logits_backward(b, y, cfg, dz);
        class_logits_backward(e.value, bank, b, dc, &e.grad);
      }
      return mean;
    };
    Parameter* ps[] = {&e, &bank.weights()};
    const auto r = grad_check(f, ps, 1e-5, 1e-8);
    EXPECT_LE(r.max_rel_error, 1e-5) << "trial " << trial << " worst " << r.worst_param << "["
                                     << r.worst_index << "] a=" << r.analytic
                                     << " n=" << r.numeric;
  }
}

}  // namespace
}  // namespace curry
