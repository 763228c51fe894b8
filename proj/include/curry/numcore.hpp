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

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace curry {

// Error hierarchy shared by every module.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ShapeError : public Error {
 public:
  using Error::Error;
};
class DegenerateError : public Error {
 public:
  using Error::Error;
};
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Vectors with Euclidean norm at or below this are rejected by normalization.
inline constexpr double kNormEpsilon = 1e-12;

// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool same_shape(const DenseMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  bool operator==(const DenseMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class ParamGroup { kFrontend, kBackend, kClassifier, kGamma };

inline constexpr std::size_t kNumParamGroups = 4;

std::string to_string(ParamGroup group);

// A learnable tensor with its gradient accumulator. Backward passes add into
// `grad`; callers zero it.
struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;
  ParamGroup group = ParamGroup::kBackend;
  bool decay = true;
  // Frozen parameters are skipped by the optimizer (no moment or decay update).
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, DenseMatrix v, ParamGroup g, bool d = true)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()),
        group(g), decay(d) {}

  void zero_grad() { grad.fill(0.0); }
};

// ---------------------------------------------------------------------------
// Dense linear algebra primitives (no gradients; used by both forward and
// backward code paths).

// out = a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// out += a^T * b
void matmul_at_b_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out += a * b^T
void matmul_a_bt_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// m.row(i) += bias for every row.
void add_row_bias(DenseMatrix& m, const DenseMatrix& bias);
// bias_grad += column sums of g.
void sum_rows_acc(const DenseMatrix& g, DenseMatrix& bias_grad);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

// ---------------------------------------------------------------------------
// Differentiable operations

// Unit-norm copy of v. Throws DegenerateError when ||v|| <= kNormEpsilon.
std::vector<double> l2_normalize(std::span<const double> v);

// Backward of l2_normalize: returns dL/dv given dL/du where u = v / ||v||.
std::vector<double> l2_normalize_backward(std::span<const double> v,
                                          std::span<const double> upstream);

// n x p matrix of cosines between rows of e (n x d) and rows of c (p x d),
// clamped to [-1, 1].
DenseMatrix cosine_matrix(const DenseMatrix& e, const DenseMatrix& c);

// Accumulates gradients of sum(upstream .* cosine_matrix(e, c)) into d_e and
// d_c. Either output may be null. Entries whose raw cosine falls outside
// [-1, 1] contribute nothing (clamp).
void cosine_matrix_backward(const DenseMatrix& e, const DenseMatrix& c,
                            const DenseMatrix& upstream, DenseMatrix* d_e,
                            DenseMatrix* d_c);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> z);

// dL/dz given p = softmax(z) and dL/dp.
std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> upstream);

// ---------------------------------------------------------------------------
// Gradient checking

// Evaluates the objective. When `with_grad` is set the function must also
// accumulate analytic gradients into every checked parameter's grad.
using Objective = std::function<double(bool with_grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares analytic gradients against central differences with step h.
// Relative error per coordinate is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const Objective& objective,
                           std::span<Parameter* const> params, double h = 1e-5,
                           double floor = 1e-8);

}  // namespace curry
