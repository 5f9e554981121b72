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

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ddtm/molgraph.hpp"

namespace ddtm {

/// A generated molecule as seen by the metrics: invalid entries may have no graph.
struct MetricsInput {
  bool parsed = false;  // false for lines that could not be turned into a graph
  MolGraph graph;
};

struct FractionResult {
  double value = 0.0;
  bool warning = false;  // denominator was zero
};

/// Fraction of graphs that pass the valence check. Empty input gives 0 with a warning.
FractionResult validity_rate(std::span<const MolGraph> graphs, const AtomVocab& vocab);
/// Distinct canonical forms among valid graphs over the valid count.
FractionResult uniqueness(std::span<const MolGraph> graphs, const AtomVocab& vocab);
/// Fraction of valid graphs whose canonical form is not in `train_keys`.
FractionResult novelty(std::span<const MolGraph> graphs, const std::set<std::string>& train_keys,
                       const AtomVocab& vocab);
/// Mean of 1 - tanimoto over unordered pairs of valid graphs, default
/// fingerprint settings. Throws UsageError for fewer than 2 valid graphs.
double diversity(std::span<const MolGraph> graphs, const AtomVocab& vocab);
/// Mean of 1 - tanimoto over unordered pairs. Throws UsageError for fewer than 2.
double diversity(std::span<const Fingerprint> fingerprints);

struct MoleculeFlags {
  bool valid = false;
  bool first_occurrence = false;  // first valid copy of its canonical form
  bool novel = false;
  std::string key;  // empty when invalid

  bool operator==(const MoleculeFlags&) const = default;
};

struct MetricsReport {
  std::size_t total = 0;
  std::size_t valid = 0;
  std::size_t unique = 0;
  std::size_t novel = 0;
  double validity = 0.0;
  double uniqueness = 0.0;
  double novelty = 0.0;
  double diversity = 0.0;
  bool diversity_defined = false;
  std::vector<std::string> warnings;
  std::vector<MoleculeFlags> molecules;

  std::string to_json() const;
  /// Throws DataError on malformed input.
  static MetricsReport from_json(std::string_view text);

  bool operator==(const MetricsReport&) const = default;
};

/// Aggregates all metrics. Unparsed inputs count toward the total as invalid.
MetricsReport report(std::span<const MetricsInput> inputs, const std::set<std::string>& train_keys,
                     const AtomVocab& vocab);
MetricsReport report(std::span<const MolGraph> graphs, const std::set<std::string>& train_keys,
                     const AtomVocab& vocab);

}  // namespace ddtm
