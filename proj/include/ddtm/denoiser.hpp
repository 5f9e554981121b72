// Copyright 2026 The DDTM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ddtm/autograd.hpp"
#include "ddtm/condition.hpp"
#include "ddtm/molgraph.hpp"
#include "ddtm/rng.hpp"

namespace ddtm {

struct DenoiserConfig {
  int width = 32;        // d
  int heads = 4;         // H; head width is d / H
  int fuse_layers = 1;   // cross-attention fusion blocks (CA only)
  int gt_layers = 2;     // graph-transformer layers
  int atom_classes = 9;  // f
  int bond_classes = kDefaultBondClasses;  // b
  int steps = 500;       // T
  int protein_dim = 32;  // width of protein embeddings
  Fusion strategy = Fusion::kConcat;
  std::uint64_t seed = 0;

  /// Throws UsageError when counts are < 1 or d is not divisible by H.
  void validate() const;
  int head_width() const { return width / heads; }

  bool operator==(const DenoiserConfig&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// All trainable tensors, in a fixed order determined by the config.
class DenoiserParams {
 public:
  DenoiserParams() = default;
  DenoiserParams(DenoiserConfig config, std::vector<NamedTensor> tensors);

  const DenoiserConfig& config() const { return config_; }
  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  const Tensor& get(const std::string& name) const;
  int index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t scalar_count() const;

 private:
  DenoiserConfig config_;
  std::vector<NamedTensor> tensors_;
  std::map<std::string, int> index_;
};

/// Shapes of every parameter tensor, in storage order.
std::vector<std::pair<std::string, std::pair<int, int>>> parameter_shapes(const DenoiserConfig& config);

/// Closed-form number of scalars for a config.
std::size_t parameter_count(const DenoiserConfig& config);

/// Initialization bound for a tensor: 1/sqrt(fan_in) for weights, 0 for
/// biases and shifts, 1 for layer-norm gains.
double init_bound(const std::string& name, int rows, int cols);

/// Weights uniform in +-init_bound; biases zero; gains one. Values are rounded
/// to float precision so checkpoints are lossless. Deterministic given rng.
DenoiserParams init_params(const DenoiserConfig& config, Rng& rng);

/// Rounds every entry to the nearest float.
void round_to_float(std::vector<double>& values);

/// Per-node and per-edge categorical predictions.
struct PredictedDistributions {
  int n = 0;
  int atom_classes = 0;
  int bond_classes = 0;
  Tensor atoms;  // n x f
  Tensor bonds;  // (n * n) x b, row i * n + j

  std::span<const double> atom(int i) const { return atoms.row(i); }
  std::span<const double> bond(int i, int j) const { return bonds.row(i * n + j); }
};

inline constexpr int kWalkLengths = 4;

/// Per-node input: atom one-hot, neighbour count per bond class (x 1/4),
/// graph size (x 1/10) and log closed-walk counts for lengths 3..6.
Tensor node_features(const MolGraph& g);
int node_feature_width(const DenoiserConfig& config);

/// Sinusoidal features of the normalized timestep t / T.
Tensor timestep_features(int t, int steps, int width);

/// Symbolic forward pass of the denoiser on a tape. Parameter leaves are
/// created on first use, so tensors a strategy does not touch receive no
/// gradient.
class DenoiserGraph {
 public:
  DenoiserGraph(const DenoiserParams& params, Tape& tape);

  Var param(const std::string& name);
  /// True when `name` has been placed on the tape.
  bool uses(const std::string& name) const { return leaves_.count(name) != 0; }

  /// Multi-head scaled dot-product attention with queries from `queries` and
  /// keys/values from `memory`, heads concatenated and projected by the
  /// block's output map.
  Var multi_head_attention(const std::string& prefix, Var queries, Var memory);
  /// LayerNorm(x + FFL(MHA(x, x))).
  Var self_attention_block(const std::string& prefix, Var x);
  /// LayerNorm(x + FFL(MHA(x, context))). Throws UsageError on an empty context.
  Var cross_attention_block(const std::string& prefix, Var x, Var context);
  /// One edge-aware graph-transformer layer over `nodes` nodes. Edge rows are
  /// (i * nodes + j). Throws UsageError if the edge features are not symmetric.
  std::pair<Var, Var> graph_transformer_layer(int layer, Var h, Var e, int nodes);

  struct Output {
    Var atom_logits;  // n x f
    Var bond_logits;  // (n * n) x b, symmetric
    int n = 0;
  };
  /// Full pipeline: embeddings, time, fusion, trunk, heads.
  Output forward(const MolGraph& noisy, const ConditionContext& context, int t);

  Var feed_forward(const std::string& prefix, Var x);

 private:
  Var context_tokens(const ConditionContext& context);

  const DenoiserParams& params_;
  Tape& tape_;
  std::map<std::string, Var> leaves_;
};

/// Denoiser prediction for a noisy graph at step t. Throws UsageError for t
/// outside [1, T] or a context whose strategy the model cannot consume.
PredictedDistributions predict(const DenoiserParams& params, const MolGraph& noisy,
                               const ConditionContext& context, int t);

struct LossAndGradients {
  double loss = 0.0;
  std::vector<Tensor> gradients;  // aligned with params.tensors()
};

/// Cross-entropy objective against the clean graph and its exact gradient
/// with respect to every parameter tensor. Throws NumericError naming the
/// first non-finite tensor when the loss is not finite.
LossAndGradients backward(const DenoiserParams& params, const MolGraph& noisy,
                          const ConditionContext& context, int t, const MolGraph& clean,
                          double lambda);

}  // namespace ddtm
