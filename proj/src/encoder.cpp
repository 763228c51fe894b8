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

#include "curry/encoder.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

namespace curry {

FrameBatch::FrameBatch(std::size_t n, std::size_t t, DenseMatrix v)
    : batch(n), time(t), values(std::move(v)) {
  if (values.rows() != n * t) {
    throw ShapeError(fmt::format("FrameBatch: {} rows for {}x{} frames", values.rows(),
                                 n, t));
  }
  if (t == 0) throw ShapeError("FrameBatch: T must be at least 1");
}

void EncoderConfig::validate() const {
  if (frame_dim == 0 || hidden_dim == 0 || attention_dim == 0 || embed_dim == 0) {
    throw Error("encoder dimensions must be positive");
  }
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) {
    throw Error(fmt::format("bn momentum {} outside [0, 1]", bn_momentum));
  }
}

void BatchNorm::set_running_stats(std::vector<double> mean, std::vector<double> var) {
  if (mean.size() != scale.value.size() || var.size() != scale.value.size()) {
    throw ShapeError("set_running_stats: width mismatch");
  }
  running_mean = std::move(mean);
  running_var = std::move(var);
  if (batches_tracked == 0) batches_tracked = 1;
}

// ---------------------------------------------------------------------------
// Layer stack: h_0 = x W_in + b_in, h_l = h_{l-1} + tanh(h_{l-1} W_l + b_l).

LayerOutputs forward_layers(const FrameBatch& x, const LayerStack& stack) {
  if (x.features() != stack.input_w.value.rows()) {
    throw ShapeError(fmt::format("forward_layers: frame dim {} vs encoder {}",
                                 x.features(), stack.input_w.value.rows()));
  }
  LayerOutputs out;
  DenseMatrix h = matmul(x.values, stack.input_w.value);
  add_row_bias(h, stack.input_b.value);
  out.hiddens.push_back(std::move(h));
  for (std::size_t l = 0; l < stack.layer_w.size(); ++l) {
    const DenseMatrix& prev = out.hiddens.back();
    DenseMatrix a = matmul(prev, stack.layer_w[l].value);
    add_row_bias(a, stack.layer_b[l].value);
    for (double& v : a.data()) v = std::tanh(v);
    DenseMatrix next = prev;
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += a[i];
    out.activations.push_back(std::move(a));
    out.hiddens.push_back(std::move(next));
  }
  return out;
}

void forward_layers_backward(const FrameBatch& x, LayerStack& stack,
                             const LayerOutputs& out,
                             std::vector<DenseMatrix> d_hiddens) {
  for (std::size_t l = stack.layer_w.size(); l-- > 0;) {
    const DenseMatrix& d_next = d_hiddens[l + 1];
    const DenseMatrix& a = out.activations[l];
    DenseMatrix d_pre(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) d_pre[i] = d_next[i] * (1.0 - a[i] * a[i]);
    matmul_at_b_acc(out.hiddens[l], d_pre, stack.layer_w[l].grad);
    sum_rows_acc(d_pre, stack.layer_b[l].grad);
    DenseMatrix& d_prev = d_hiddens[l];
    for (std::size_t i = 0; i < d_prev.size(); ++i) d_prev[i] += d_next[i];
    matmul_a_bt_acc(d_pre, stack.layer_w[l].value, d_prev);
  }
  matmul_at_b_acc(x.values, d_hiddens[0], stack.input_w.grad);
  sum_rows_acc(d_hiddens[0], stack.input_b.grad);
}

// ---------------------------------------------------------------------------

DenseMatrix weighted_layer_sum(std::span<const DenseMatrix> hiddens,
                               const DenseMatrix& layer_logits) {
  if (hiddens.empty() || hiddens.size() != layer_logits.size()) {
    throw ShapeError(fmt::format("weighted_layer_sum: {} layers, {} logits",
                                 hiddens.size(), layer_logits.size()));
  }
  const auto w = softmax(layer_logits.data());
  DenseMatrix out(hiddens[0].rows(), hiddens[0].cols());
  for (std::size_t l = 0; l < hiddens.size(); ++l) {
    if (!hiddens[l].same_shape(out)) throw ShapeError("weighted_layer_sum: ragged layers");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[l] * hiddens[l][i];
  }
  return out;
}

void weighted_layer_sum_backward(std::span<const DenseMatrix> hiddens,
                                 const DenseMatrix& layer_logits,
                                 const DenseMatrix& upstream,
                                 std::vector<DenseMatrix>& d_hiddens,
                                 DenseMatrix& d_logits) {
  const auto w = softmax(layer_logits.data());
  std::vector<double> d_w(hiddens.size());
  for (std::size_t l = 0; l < hiddens.size(); ++l) {
    d_w[l] = dot(hiddens[l].data(), upstream.data());
    for (std::size_t i = 0; i < upstream.size(); ++i) d_hiddens[l][i] += w[l] * upstream[i];
  }
  const auto d_z = softmax_backward(w, d_w);
  for (std::size_t l = 0; l < d_z.size(); ++l) d_logits[l] += d_z[l];
}

// ---------------------------------------------------------------------------
// Attentive statistics pooling: score_t = v . tanh(h_t W + b), alpha = softmax_t.

DenseMatrix attentive_stats_pooling(const DenseMatrix& h, std::size_t batch,
                                    std::size_t time, const AspParams& params,
                                    AspCache* cache) {
  if (h.rows() != batch * time || time == 0) {
    throw ShapeError("attentive_stats_pooling: frame count mismatch");
  }
  const std::size_t width = h.cols();
  DenseMatrix act = matmul(h, params.w.value);
  add_row_bias(act, params.b.value);
  for (double& v : act.data()) v = std::tanh(v);

  std::vector<double> alpha(batch * time);
  DenseMatrix mean(batch, width), variance(batch, width), sigma(batch, width);
  DenseMatrix out(batch, 2 * width);
  std::vector<double> scores(time);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t t = 0; t < time; ++t) {
      scores[t] = dot(act.row(n * time + t), params.v.value.data());
    }
    const auto a = softmax(scores);
    std::copy(a.begin(), a.end(), alpha.begin() + static_cast<std::ptrdiff_t>(n * time));
    auto mu = mean.row(n);
    auto m2 = variance.row(n);
    for (std::size_t t = 0; t < time; ++t) {
      auto ht = h.row(n * time + t);
      for (std::size_t j = 0; j < width; ++j) {
        mu[j] += a[t] * ht[j];
        m2[j] += a[t] * ht[j] * ht[j];
      }
    }
    for (std::size_t j = 0; j < width; ++j) {
      m2[j] -= mu[j] * mu[j];
      sigma(n, j) = std::sqrt(std::max(m2[j], kVarEpsilon));
      out(n, j) = mu[j];
      out(n, width + j) = sigma(n, j);
    }
  }
  if (cache != nullptr) {
    cache->activations = std::move(act);
    cache->alpha = std::move(alpha);
    cache->mean = std::move(mean);
    cache->variance = std::move(variance);
    cache->sigma = std::move(sigma);
  }
  return out;
}

DenseMatrix attentive_stats_pooling_backward(const DenseMatrix& h, std::size_t batch,
                                             std::size_t time, AspParams& params,
                                             const AspCache& cache,
                                             const DenseMatrix& upstream) {
  const std::size_t width = h.cols();
  const std::size_t att = params.w.value.cols();
  DenseMatrix d_h(h.rows(), width);
  DenseMatrix d_pre(h.rows(), att);
  std::vector<double> d_mu(width), d_m2(width), d_alpha(time);

  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t j = 0; j < width; ++j) {
      const double mu = cache.mean(n, j);
      const double ds = upstream(n, width + j);
      // sigma = sqrt(m2 - mu^2) above the floor, constant below it.
      double d_var = 0.0;
      if (cache.variance(n, j) > kVarEpsilon) d_var = ds / (2.0 * cache.sigma(n, j));
      d_m2[j] = d_var;
      d_mu[j] = upstream(n, j) - 2.0 * mu * d_var;
    }
    double weighted = 0.0;
    for (std::size_t t = 0; t < time; ++t) {
      const std::size_t r = n * time + t;
      auto ht = h.row(r);
      const double a = cache.alpha[r];
      auto dht = d_h.row(r);
      double da = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        dht[j] += a * (d_mu[j] + 2.0 * ht[j] * d_m2[j]);
        da += ht[j] * d_mu[j] + ht[j] * ht[j] * d_m2[j];
      }
      d_alpha[t] = da;
      weighted += a * da;
    }
    for (std::size_t t = 0; t < time; ++t) {
      const std::size_t r = n * time + t;
      const double d_score = cache.alpha[r] * (d_alpha[t] - weighted);
      auto act = cache.activations.row(r);
      auto dp = d_pre.row(r);
      for (std::size_t k = 0; k < att; ++k) {
        params.v.grad[k] += d_score * act[k];
        dp[k] = d_score * params.v.value[k] * (1.0 - act[k] * act[k]);
      }
    }
  }
  matmul_at_b_acc(h, d_pre, params.w.grad);
  sum_rows_acc(d_pre, params.b.grad);
  matmul_a_bt_acc(d_pre, params.w.value, d_h);
  return d_h;
}

// ---------------------------------------------------------------------------

DenseMatrix project_embed(const DenseMatrix& pooled, const Parameter& proj_w,
                          const Parameter& proj_b, BatchNorm& bn, Mode mode,
                          ProjectionCache* cache) {
  if (mode == Mode::kEval && !bn.initialized()) {
    throw BatchNormStateError("project_embed: eval mode before any training batch");
  }
  DenseMatrix z = matmul(pooled, proj_w.value);
  add_row_bias(z, proj_b.value);
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();

  std::vector<double> mean(d, 0.0), var(d, 0.0), inv_std(d);
  if (mode == Mode::kTrain) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) mean[j] += z(i, j);
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) var[j] += (z(i, j) - mean[j]) * (z(i, j) - mean[j]);
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double biased = var[j] / static_cast<double>(n);
      const double unbiased = n > 1 ? var[j] / static_cast<double>(n - 1) : biased;
      inv_std[j] = 1.0 / std::sqrt(biased + kVarEpsilon);
      bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mean[j];
      bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * unbiased;
    }
    ++bn.batches_tracked;
  } else {
    mean = bn.running_mean;
    for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(bn.running_var[j] + kVarEpsilon);
  }

  DenseMatrix normalized(n, d), out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      normalized(i, j) = (z(i, j) - mean[j]) * inv_std[j];
      out(i, j) = bn.scale.value[j] * normalized(i, j) + bn.shift.value[j];
    }
  }
  if (cache != nullptr) {
    cache->pre_bn = std::move(z);
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return out;
}

DenseMatrix project_embed_backward(const DenseMatrix& pooled, Parameter& proj_w,
                                   Parameter& proj_b, BatchNorm& bn,
                                   const ProjectionCache& cache,
                                   const DenseMatrix& upstream) {
  const std::size_t n = upstream.rows();
  const std::size_t d = upstream.cols();
  DenseMatrix d_z(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    double sum_dx = 0.0, sum_dx_x = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      bn.scale.grad[j] += upstream(i, j) * cache.normalized(i, j);
      bn.shift.grad[j] += upstream(i, j);
      const double dx = upstream(i, j) * bn.scale.value[j];
      sum_dx += dx;
      sum_dx_x += dx * cache.normalized(i, j);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = upstream(i, j) * bn.scale.value[j];
      if (cache.mode == Mode::kTrain) {
        const double nn = static_cast<double>(n);
        d_z(i, j) = cache.inv_std[j] / nn *
                    (nn * dx - sum_dx - cache.normalized(i, j) * sum_dx_x);
      } else {
        d_z(i, j) = dx * cache.inv_std[j];
      }
    }
  }
  matmul_at_b_acc(pooled, d_z, proj_w.grad);
  sum_rows_acc(d_z, proj_b.grad);
  DenseMatrix d_pooled(pooled.rows(), pooled.cols());
  matmul_a_bt_acc(d_z, proj_w.value, d_pooled);
  return d_pooled;
}

// ---------------------------------------------------------------------------

namespace {

Parameter gaussian_param(std::string name, std::size_t rows, std::size_t cols,
                         double stddev, ParamGroup group, std::mt19937_64& rng) {
  DenseMatrix m(rows, cols);
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& v : m.data()) v = normal(rng);
  return Parameter(std::move(name), std::move(m), group);
}

}  // namespace

ToyEncoder::ToyEncoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t f = cfg.frame_dim;
  const std::size_t h = cfg.hidden_dim;
  const std::size_t a = cfg.attention_dim;
  const std::size_t d = cfg.embed_dim;
  const double fs = 1.0 / std::sqrt(static_cast<double>(f));
  const double hs = 1.0 / std::sqrt(static_cast<double>(h));

  layers_.input_w = gaussian_param("frontend.input_w", f, h, fs, ParamGroup::kFrontend, rng);
  layers_.input_b = Parameter("frontend.input_b", DenseMatrix(1, h), ParamGroup::kFrontend);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    layers_.layer_w.push_back(gaussian_param(fmt::format("frontend.layer{}_w", l), h, h,
                                             0.5 * hs, ParamGroup::kFrontend, rng));
    layers_.layer_b.push_back(Parameter(fmt::format("frontend.layer{}_b", l),
                                        DenseMatrix(1, h), ParamGroup::kFrontend));
  }
  layer_logits_ = Parameter("backend.layer_logits", DenseMatrix(1, cfg.num_layers + 1),
                            ParamGroup::kBackend);
  asp_.w = gaussian_param("backend.asp_w", h, a, hs, ParamGroup::kBackend, rng);
  asp_.b = Parameter("backend.asp_b", DenseMatrix(1, a), ParamGroup::kBackend);
  asp_.v = gaussian_param("backend.asp_v", a, 1, 1.0 / std::sqrt(static_cast<double>(a)),
                          ParamGroup::kBackend, rng);
  proj_w_ = gaussian_param("backend.proj_w", 2 * h, d,
                           1.0 / std::sqrt(static_cast<double>(2 * h)),
                           ParamGroup::kBackend, rng);
  proj_b_ = Parameter("backend.proj_b", DenseMatrix(1, d), ParamGroup::kBackend);
  bn_.scale = Parameter("backend.bn_scale", DenseMatrix(1, d, 1.0), ParamGroup::kBackend,
                        /*decay=*/false);
  bn_.shift = Parameter("backend.bn_shift", DenseMatrix(1, d), ParamGroup::kBackend,
                        /*decay=*/false);
  bn_.running_mean.assign(d, 0.0);
  bn_.running_var.assign(d, 1.0);
  bn_.momentum = cfg.bn_momentum;
}

DenseMatrix ToyEncoder::forward(const FrameBatch& x, Mode mode, EncoderCache* cache) {
  LayerOutputs layers = forward_layers(x, layers_);
  DenseMatrix combined = weighted_layer_sum(layers.hiddens, layer_logits_.value);
  AspCache asp_cache;
  DenseMatrix pooled = attentive_stats_pooling(combined, x.batch, x.time, asp_,
                                               cache != nullptr ? &asp_cache : nullptr);
  ProjectionCache proj_cache;
  DenseMatrix out = project_embed(pooled, proj_w_, proj_b_, bn_, mode,
                                  cache != nullptr ? &proj_cache : nullptr);
  if (cache != nullptr) {
    cache->input = x;
    cache->layers = std::move(layers);
    cache->combined = std::move(combined);
    cache->asp = std::move(asp_cache);
    cache->pooled = std::move(pooled);
    cache->projection = std::move(proj_cache);
  }
  return out;
}

void ToyEncoder::backward(const EncoderCache& cache, const DenseMatrix& d_embeddings) {
  const DenseMatrix d_pooled =
      project_embed_backward(cache.pooled, proj_w_, proj_b_, bn_, cache.projection,
                             d_embeddings);
  const DenseMatrix d_combined = attentive_stats_pooling_backward(
      cache.combined, cache.input.batch, cache.input.time, asp_, cache.asp, d_pooled);
  std::vector<DenseMatrix> d_hiddens;
  for (const auto& hl : cache.layers.hiddens) d_hiddens.emplace_back(hl.rows(), hl.cols());
  weighted_layer_sum_backward(cache.layers.hiddens, layer_logits_.value, d_combined,
                              d_hiddens, layer_logits_.grad);
  forward_layers_backward(cache.input, layers_, cache.layers, std::move(d_hiddens));
}

std::vector<Parameter*> ToyEncoder::parameters() {
  std::vector<Parameter*> out{&layers_.input_w, &layers_.input_b};
  for (std::size_t l = 0; l < layers_.layer_w.size(); ++l) {
    out.push_back(&layers_.layer_w[l]);
    out.push_back(&layers_.layer_b[l]);
  }
  for (Parameter* p : {&layer_logits_, &asp_.w, &asp_.b, &asp_.v, &proj_w_, &proj_b_,
                       &bn_.scale, &bn_.shift}) {
    out.push_back(p);
  }
  return out;
}

std::vector<const Parameter*> ToyEncoder::parameters() const {
  auto mut = const_cast<ToyEncoder*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

}  // namespace curry
