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
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ddtm/condition.hpp"
#include "ddtm/denoiser.hpp"
#include "ddtm/diffusion.hpp"
#include "ddtm/ingest.hpp"
#include "ddtm/molgraph.hpp"
#include "ddtm/rng.hpp"

namespace ddtm {

struct TrainConfig {
  double lambda = 5.0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 8;
  int steps = 1000;
  double dropout_p = 0.1;
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;  // 0 disables periodic checkpoints
  int size_cap = 38;

  /// Throws UsageError for lambda < 0, lr <= 0, probabilities outside [0, 1]
  /// or non-positive counts.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

/// Everything a config file can set.
struct RunConfig {
  DenoiserConfig model;
  TrainConfig train;
  AtomVocab vocab = AtomVocab::standard();

  /// Fields: d, heads, fuse_layers, gt_layers, T, lambda, lr, batch_size,
  /// steps, dropout_p, seed, size_cap, vocab; optional strategy, protein_dim,
  /// checkpoint_interval. Missing fields keep their defaults. `vocab` is a list
  /// of symbols or of [symbol, valence] pairs. Throws UsageError.
  static RunConfig from_json(std::string_view text);
  std::string to_json() const;

  bool operator==(const RunConfig&) const = default;
};

/// Distribution over molecule sizes seen in training.
struct NodeCountHistogram {
  std::map<int, double> probabilities;

  /// Throws UsageError when empty, when a count is < 1, or when the
  /// probabilities do not sum to 1 within 1e-9.
  void validate() const;

  bool operator==(const NodeCountHistogram&) const = default;
};

/// First and second moment estimates, aligned with the parameter tensors.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  static AdamState zeros(const DenoiserParams& params);
};

/// Exact class and size counts over the training molecules.
struct DataCounts {
  std::vector<std::uint64_t> atoms;  // per atom class, over all nodes
  std::vector<std::uint64_t> bonds;  // per bond class, over unordered pairs
  std::map<int, std::uint64_t> sizes;

  static DataCounts from_graphs(std::span<const MolGraph> graphs, int atom_classes, int bond_classes);
  Marginals marginals() const;
  NodeCountHistogram histogram() const;

  bool operator==(const DataCounts&) const = default;
};

struct Checkpoint {
  RunConfig config;
  DenoiserParams params;
  AdamState optimizer;
  DataCounts counts;
  Marginals marginals;           // derived from counts
  NodeCountHistogram histogram;  // derived from counts
  std::int64_t step = 0;
  EmbeddingMap proteins;  // every protein referenced in training
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws DataError on a bad magic, version, truncated data or missing tensor.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// sum_i CE(x_i, pX_i) + lambda sum_{i<j} 2 CE(e_ij, pE_ij), natural log,
/// probabilities floored at 1e-12, diagonal excluded.
double loss(const PredictedDistributions& pred, const MolGraph& clean, double lambda);

/// A clean graph with its (undropped) conditioning.
struct TrainingExample {
  MolGraph graph;
  ConditionContext context;
};

/// One optimizer update over a batch. For each item in order: t ~ U{1..T},
/// G^t ~ q(G^t | G^0), context replaced by the null context with probability
/// dropout_p, then loss and gradients. Gradients and loss are averaged over
/// the batch in item order, then Adam updates every tensor. Returns the mean
/// loss. Throws UsageError on an empty batch and NumericError on a non-finite
/// loss (parameters untouched).
double train_step(DenoiserParams& params, std::span<const TrainingExample> batch, const NoiseSchedule& schedule,
                  const Marginals& marginals, AdamState& optimizer, const TrainConfig& config, Rng& rng);

struct TrainReport {
  Checkpoint checkpoint;
  std::vector<double> losses;  // one per step
  std::size_t skipped_oversize = 0;
};

/// Builds contexts, marginals and the size histogram from `triples`, then runs
/// config.train.steps updates over seeded shuffled batches. Triples with empty
/// protein ids train unconditionally. `on_checkpoint` (if set) receives a
/// snapshot every checkpoint_interval steps. Throws DataError for an empty
/// dataset or an unknown protein id.
TrainReport train(const std::vector<TrainingTriple>& triples, const EmbeddingMap& embeddings,
                  const RunConfig& config,
                  const std::function<void(const Checkpoint&)>& on_checkpoint = nullptr);

/// Context for a protein pair using the checkpoint's stored embeddings.
/// Throws UsageError for an unknown id.
ConditionContext checkpoint_context(const Checkpoint& ckpt, const std::string& protein_a,
                                    const std::string& protein_b);

}  // namespace ddtm
