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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ddtm/condition.hpp"
#include "ddtm/molgraph.hpp"

namespace ddtm {

enum class Measure { kIC50, kKd, kKi, kEC50 };

std::string_view measure_name(Measure m);
/// Throws DataError for anything but IC50, Kd, Ki or EC50.
Measure parse_measure(std::string_view text);

struct DatasetRecord {
  std::string smiles;
  std::string protein_id;
  Measure measure = Measure::kIC50;
  double value_nm = 0.0;  // finite, > 0
  std::size_t line = 0;   // 1-based line in the source file
};

struct LoadedDataset {
  std::vector<DatasetRecord> records;
  std::vector<ProteinSequence> sequences;
  std::size_t skipped_rows = 0;
};

/// Tab-separated records with a header naming the columns smiles, protein_id,
/// measure and value_nM (any order, extra columns ignored). Malformed rows are
/// skipped and counted. Throws DataError for a missing file or header.
std::vector<DatasetRecord> load_records(const std::filesystem::path& path, std::size_t* skipped = nullptr);

LoadedDataset load_dataset(const std::filesystem::path& records_path, const std::filesystem::path& fasta_path);

enum class Activity { kActive, kInactive, kAmbiguous };

inline constexpr double kActiveBelowNm = 100.0;
inline constexpr double kInactiveAboveNm = 10000.0;

/// value < 100 nM is active, value > 10000 nM inactive, anything else ambiguous.
Activity label_bioactivity(const DatasetRecord& record);

/// A record whose molecule has been parsed and keyed.
struct LabeledRecord {
  std::string key;  // canonical form
  std::string protein_id;
  Activity label = Activity::kAmbiguous;
  MolGraph graph;
};

struct IngestOptions {
  int size_cap = 38;
  int pair_cap = 10;
};

struct IngestStats {
  std::size_t skipped_rows = 0;
  std::size_t parse_failures = 0;
  std::size_t invalid = 0;
  std::size_t oversize = 0;
  std::size_t ambiguous = 0;
  std::size_t conflicted = 0;
  std::size_t unknown_protein = 0;
  std::size_t single_target = 0;
  std::size_t capped_pairs = 0;
};

/// Parses and keys every record. Unparsable, invalid and oversize molecules
/// are dropped and counted.
std::vector<LabeledRecord> label_records(const std::vector<DatasetRecord>& records, const AtomVocab& vocab,
                                         const IngestOptions& options, IngestStats& stats);

/// Removes every (molecule, protein) pair that carries both an active and an
/// inactive label, then keeps one record per (molecule, protein, label).
std::vector<LabeledRecord> resolve_conflicts(const std::vector<LabeledRecord>& records,
                                             IngestStats* stats = nullptr);

/// Molecule with two target proteins.
struct TrainingTriple {
  MolGraph graph;
  std::string protein_a;  // empty for unconditional examples
  std::string protein_b;
};

/// One triple per unordered pair of proteins a molecule is active against,
/// at most `pair_cap` per molecule, sorted by canonical form then protein ids.
/// Proteins missing from `sequences` are ignored.
std::vector<TrainingTriple> pair_dual_targets(const std::vector<LabeledRecord>& records,
                                              const std::vector<ProteinSequence>& sequences,
                                              const IngestOptions& options, IngestStats* stats = nullptr);

/// Full pipeline over loaded files.
std::vector<TrainingTriple> ingest(const LoadedDataset& data, const AtomVocab& vocab, const IngestOptions& options,
                                   IngestStats& stats);

/// "smiles\tprotein_a\tprotein_b\n" per triple, SMILES in canonical form.
std::string format_triples(const std::vector<TrainingTriple>& triples, const AtomVocab& vocab);

/// Reads the format written by format_triples.
std::vector<TrainingTriple> parse_triples(std::string_view text, const AtomVocab& vocab);

}  // namespace ddtm
