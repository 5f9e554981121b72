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
#include <span>
#include <string>
#include <vector>

#include "ddtm/condition.hpp"
#include "ddtm/denoiser.hpp"
#include "ddtm/diffusion.hpp"
#include "ddtm/molgraph.hpp"
#include "ddtm/rng.hpp"
#include "ddtm/trainer.hpp"

namespace ddtm {

/// Throws UsageError for an empty or malformed histogram.
int sample_node_count(const NodeCountHistogram& histogram, Rng& rng);

/// p(x^{t-1}) = sum_x q(x^{t-1} | x^t, x^0 = x) p(x), where x^0 values that
/// cannot reach x^t contribute nothing. Renormalized; falls back to the
/// unmixed prediction support only if every term vanishes (NumericError then).
std::vector<double> reverse_mixture(int xt, std::span<const double> predicted, int t, const NoiseSchedule& schedule,
                                    std::span<const double> marginal);

/// Per-node and per-pair reverse distributions for one step.
struct ReverseDistributions {
  int n = 0;
  std::vector<std::vector<double>> atoms;  // n
  std::vector<std::vector<double>> bonds;  // n * n, row i * n + j; only i < j filled
};

ReverseDistributions reverse_distributions(const PredictedDistributions& pred, const MolGraph& noisy, int t,
                                           const NoiseSchedule& schedule, const Marginals& marginals);

/// G^{t-1} from G^t: predict, mix, then sample each node and each upper-triangle
/// pair (mirrored) in row order. At t = 1 takes the argmax instead of sampling.
/// Throws UsageError for t outside [1, T].
MolGraph denoise_step(const DenoiserParams& params, const MolGraph& noisy, const ConditionContext& context, int t,
                      const NoiseSchedule& schedule, const Marginals& marginals, Rng& rng);

/// Same as denoise_step with a precomputed prediction.
MolGraph denoise_from_prediction(const PredictedDistributions& pred, const MolGraph& noisy, int t,
                                 const NoiseSchedule& schedule, const Marginals& marginals, Rng& rng);

/// Full reverse chain for one molecule with its own stream seeded from (seed, index).
MolGraph generate_one(const Checkpoint& ckpt, const ConditionContext& context, std::uint64_t seed,
                      std::uint64_t index);

/// `count` molecules; molecule k uses derive_seed(seed, k).
std::vector<MolGraph> generate(const Checkpoint& ckpt, const ConditionContext& context, int count,
                               std::uint64_t seed);

/// "atoms=C,C,O;bonds=0-1:1,1-2:2" listing atoms in node order and bonds i<j.
std::string edge_list(const MolGraph& g, const AtomVocab& vocab);
/// Inverse of edge_list. Throws DataError.
MolGraph parse_edge_list(std::string_view text, const AtomVocab& vocab, int bond_classes = kDefaultBondClasses);

/// One line per molecule: SMILES for valid graphs, "INVALID\t" + edge_list otherwise.
std::string format_generated(std::span<const MolGraph> graphs, const AtomVocab& vocab);

}  // namespace ddtm
