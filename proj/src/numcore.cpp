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

#include "curry/numcore.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace curry {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError(fmt::format("DenseMatrix: {} values for a {}x{} matrix",
                                 data_.size(), rows_, cols_));
  }
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

std::string to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::kFrontend:
      return "frontend";
    case ParamGroup::kBackend:
      return "backend";
    case ParamGroup::kClassifier:
      return "classifier";
    case ParamGroup::kGamma:
      return "gamma";
  }
  return "unknown";
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError(fmt::format("matmul: {}x{} times {}x{}", a.rows(), a.cols(),
                                 b.rows(), b.cols()));
  }
  DenseMatrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

void matmul_at_b_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    throw ShapeError("matmul_at_b_acc: shape mismatch");
  }
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* arow = a.row(r).data();
    const double* brow = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = arow[i];
      if (ari == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += ari * brow[j];
    }
  }
}

void matmul_a_bt_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (a.cols() != b.cols() || out.rows() != a.rows() || out.cols() != b.rows()) {
    throw ShapeError("matmul_a_bt_acc: shape mismatch");
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) += dot(a.row(i), b.row(j));
    }
  }
}

void add_row_bias(DenseMatrix& m, const DenseMatrix& bias) {
  if (bias.size() != m.cols()) throw ShapeError("add_row_bias: width mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

void sum_rows_acc(const DenseMatrix& g, DenseMatrix& bias_grad) {
  if (bias_grad.size() != g.cols()) throw ShapeError("sum_rows_acc: width mismatch");
  for (std::size_t i = 0; i < g.rows(); ++i) {
    auto r = g.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) bias_grad[j] += r[j];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::vector<double> l2_normalize(std::span<const double> v) {
  const double n = norm(v);
  if (!(n > kNormEpsilon)) {
    throw DegenerateError(fmt::format("l2_normalize: norm {} is degenerate", n));
  }
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

std::vector<double> l2_normalize_backward(std::span<const double> v,
                                          std::span<const double> upstream) {
  // d(v/|v|) = (I - u u^T) / |v|
  const auto u = l2_normalize(v);
  const double n = norm(v);
  const double proj = dot(u, upstream);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (upstream[i] - proj * u[i]) / n;
  return out;
}

namespace {

std::vector<double> row_norms(const DenseMatrix& m, const char* what) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out[i] = norm(m.row(i));
    if (!(out[i] > kNormEpsilon)) {
      throw DegenerateError(fmt::format("{}: row {} has degenerate norm", what, i));
    }
  }
  return out;
}

}  // namespace

DenseMatrix cosine_matrix(const DenseMatrix& e, const DenseMatrix& c) {
  if (e.cols() != c.cols()) {
    throw ShapeError(
        fmt::format("cosine_matrix: dims {} vs {}", e.cols(), c.cols()));
  }
  const auto ne = row_norms(e, "cosine_matrix");
  const auto nc = row_norms(c, "cosine_matrix");
  DenseMatrix out(e.rows(), c.rows());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    for (std::size_t j = 0; j < c.rows(); ++j) {
      out(i, j) = std::clamp(dot(e.row(i), c.row(j)) / (ne[i] * nc[j]), -1.0, 1.0);
    }
  }
  return out;
}

void cosine_matrix_backward(const DenseMatrix& e, const DenseMatrix& c,
                            const DenseMatrix& upstream, DenseMatrix* d_e,
                            DenseMatrix* d_c) {
  if (e.cols() != c.cols() || upstream.rows() != e.rows() ||
      upstream.cols() != c.rows()) {
    throw ShapeError("cosine_matrix_backward: shape mismatch");
  }
  const auto ne = row_norms(e, "cosine_matrix_backward");
  const auto nc = row_norms(c, "cosine_matrix_backward");
  const std::size_t d = e.cols();
  for (std::size_t i = 0; i < e.rows(); ++i) {
    auto er = e.row(i);
    for (std::size_t j = 0; j < c.rows(); ++j) {
      const double g = upstream(i, j);
      if (g == 0.0) continue;
      auto cr = c.row(j);
      const double raw = dot(er, cr) / (ne[i] * nc[j]);
      if (raw > 1.0 || raw < -1.0) continue;
      // d cos / d e = c/(|e||c|) - cos e/|e|^2, symmetric for c.
      if (d_e != nullptr) {
        auto out = d_e->row(i);
        const double a = g / (ne[i] * nc[j]);
        const double b = g * raw / (ne[i] * ne[i]);
        for (std::size_t k = 0; k < d; ++k) out[k] += a * cr[k] - b * er[k];
      }
      if (d_c != nullptr) {
        auto out = d_c->row(j);
        const double a = g / (ne[i] * nc[j]);
        const double b = g * raw / (nc[j] * nc[j]);
        for (std::size_t k = 0; k < d; ++k) out[k] += a * er[k] - b * cr[k];
      }
    }
  }
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.size());
  if (z.empty()) return out;
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> upstream) {
  const double inner = dot(probs, upstream);
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = probs[i] * (upstream[i] - inner);
  }
  return out;
}

GradCheckResult grad_check(const Objective& objective,
                           std::span<Parameter* const> params, double h,
                           double floor) {
  for (Parameter* p : params) p->zero_grad();
  const double base = objective(true);
  if (!std::isfinite(base)) throw NonFiniteError("grad_check: non-finite objective");

  std::vector<DenseMatrix> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = objective(false);
      p.value[i] = saved - h;
      const double down = objective(false);
      p.value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NonFiniteError(fmt::format("grad_check: non-finite objective at {}[{}]",
                                         p.name, i));
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi]->grad = analytic[pi];
  return result;
}

}  // namespace curry
