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

// Toy layered speaker encoder:
//
//   frames -> input affine (h_0) -> L residual tanh layers (h_1..h_L)
//          -> softmax(lambda)-weighted layer sum
//          -> attentive statistics pooling [mean, std]
//          -> affine projection -> batch norm -> embedding (d)

#include <cstdint>
#include <span>
#include <vector>

#include "curry/numcore.hpp"

namespace curry {

// Variance floor inside both pooling std and batch norm.
inline constexpr double kVarEpsilon = 1e-6;

class BatchNormStateError : public Error {
 public:
  using Error::Error;
};

// n utterances of T frames with F features, stored as (n*T) x F, utterance-major.
struct FrameBatch {
  std::size_t batch = 0;
  std::size_t time = 0;
  DenseMatrix values;

  FrameBatch() = default;
  FrameBatch(std::size_t n, std::size_t t, DenseMatrix v);
  std::size_t features() const { return values.cols(); }
};

enum class Mode { kTrain, kEval };

struct EncoderConfig {
  std::size_t frame_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t num_layers = 4;
  std::size_t attention_dim = 16;
  std::size_t embed_dim = 32;
  double bn_momentum = 0.1;

  void validate() const;
};

struct AspParams {
  Parameter w;  // H x A
  Parameter b;  // 1 x A
  Parameter v;  // A x 1
};

struct BatchNorm {
  Parameter scale;  // 1 x d
  Parameter shift;  // 1 x d
  std::vector<double> running_mean;
  std::vector<double> running_var;
  std::uint64_t batches_tracked = 0;
  double momentum = 0.1;

  bool initialized() const { return batches_tracked > 0; }
  // Installs explicit running statistics and marks them as initialized.
  void set_running_stats(std::vector<double> mean, std::vector<double> var);
};

struct LayerStack {
  Parameter input_w;  // F x H
  Parameter input_b;  // 1 x H
  std::vector<Parameter> layer_w;  // H x H each
  std::vector<Parameter> layer_b;  // 1 x H each
};

// ---------------------------------------------------------------------------
// Stage functions. Each backward accumulates parameter gradients.

struct LayerOutputs {
  std::vector<DenseMatrix> hiddens;      // L+1 entries, (n*T) x H
  std::vector<DenseMatrix> activations;  // L entries, tanh outputs
};

LayerOutputs forward_layers(const FrameBatch& x, const LayerStack& stack);

// d_hiddens holds dLoss/dh_l for every layer; returns nothing, grads go into stack.
void forward_layers_backward(const FrameBatch& x, LayerStack& stack,
                             const LayerOutputs& out, std::vector<DenseMatrix> d_hiddens);

DenseMatrix weighted_layer_sum(std::span<const DenseMatrix> hiddens,
                               const DenseMatrix& layer_logits);

void weighted_layer_sum_backward(std::span<const DenseMatrix> hiddens,
                                 const DenseMatrix& layer_logits,
                                 const DenseMatrix& upstream,
                                 std::vector<DenseMatrix>& d_hiddens,
                                 DenseMatrix& d_logits);

struct AspCache {
  DenseMatrix activations;     // (n*T) x A
  std::vector<double> alpha;   // n*T attention weights
  DenseMatrix mean;            // n x H
  DenseMatrix variance;        // n x H, raw (before the floor)
  DenseMatrix sigma;           // n x H
};

// n x 2H matrix [attention-weighted mean, attention-weighted std].
DenseMatrix attentive_stats_pooling(const DenseMatrix& h, std::size_t batch,
                                    std::size_t time, const AspParams& params,
                                    AspCache* cache = nullptr);

// Returns dLoss/dh.
DenseMatrix attentive_stats_pooling_backward(const DenseMatrix& h, std::size_t batch,
                                             std::size_t time, AspParams& params,
                                             const AspCache& cache,
                                             const DenseMatrix& upstream);

struct ProjectionCache {
  DenseMatrix pre_bn;      // n x d affine output
  DenseMatrix normalized;  // n x d
  std::vector<double> inv_std;
  Mode mode = Mode::kTrain;
};

// affine -> batch norm. Train mode uses batch statistics and updates the
// running estimates; eval mode requires initialized running estimates.
DenseMatrix project_embed(const DenseMatrix& pooled, const Parameter& proj_w,
                          const Parameter& proj_b, BatchNorm& bn, Mode mode,
                          ProjectionCache* cache = nullptr);

// Returns dLoss/dpooled.
DenseMatrix project_embed_backward(const DenseMatrix& pooled, Parameter& proj_w,
                                   Parameter& proj_b, BatchNorm& bn,
                                   const ProjectionCache& cache,
                                   const DenseMatrix& upstream);

// ---------------------------------------------------------------------------

struct EncoderCache {
  FrameBatch input;
  LayerOutputs layers;
  DenseMatrix combined;
  AspCache asp;
  DenseMatrix pooled;
  ProjectionCache projection;
};

class ToyEncoder {
 public:
  ToyEncoder(const EncoderConfig& cfg, std::uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }

  DenseMatrix forward(const FrameBatch& x, Mode mode, EncoderCache* cache = nullptr);
  void backward(const EncoderCache& cache, const DenseMatrix& d_embeddings);

  // Stable order; used by the optimizer and the checkpoint format.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  LayerStack& layers() { return layers_; }
  const LayerStack& layers() const { return layers_; }
  Parameter& layer_logits() { return layer_logits_; }
  const Parameter& layer_logits() const { return layer_logits_; }
  AspParams& asp() { return asp_; }
  Parameter& proj_w() { return proj_w_; }
  Parameter& proj_b() { return proj_b_; }
  BatchNorm& bn() { return bn_; }
  const BatchNorm& bn() const { return bn_; }

 private:
  EncoderConfig cfg_;
  LayerStack layers_;
  Parameter layer_logits_;
  AspParams asp_;
  Parameter proj_w_;
  Parameter proj_b_;
  BatchNorm bn_;
};

}  // namespace curry
