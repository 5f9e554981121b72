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

#include "ddtm/molgraph.hpp"

namespace ddtm {

/// A parsed molecule before kekulization: bonds may carry an aromatic mark
/// and atoms keep the bracket hydrogen count needed to decide which aromatic
/// atoms take a double bond.
struct AromaticGraph {
  struct Atom {
    int element = 0;         // vocabulary index
    bool aromatic = false;
    int hydrogens = 0;       // explicit bracket H count, 0 otherwise
    int default_valence = 0;  // used to find atoms with a free valence
    std::size_t offset = 0;  // position in the source text
  };
  struct Edge {
    int i = 0;
    int j = 0;
    int bond_class = 1;  // ignored when aromatic
    bool aromatic = false;
  };
  std::vector<Atom> atoms;
  std::vector<Edge> edges;
  int atom_classes = 0;
};

struct SmilesOptions {
  /// Accept '.'-separated fragments as one disconnected graph. Off by default:
  /// ingestion rejects salts and mixtures.
  bool allow_fragments = false;
};

/// Parses the supported SMILES subset into a kekulized MolGraph. Throws
/// SmilesError (with character offset) on malformed input, unsupported
/// tokens, unknown elements, or kekulization failure.
MolGraph parse_smiles(std::string_view text, const AtomVocab& vocab = AtomVocab::standard(),
                      const SmilesOptions& options = {});

/// Tokenizes and builds the graph without resolving aromaticity.
AromaticGraph parse_smiles_raw(std::string_view text, const AtomVocab& vocab = AtomVocab::standard(),
                               const SmilesOptions& options = {});

/// Assigns single/double bonds to aromatic edges by backtracking perfect
/// matching over the atoms that still have a free valence. Throws SmilesError
/// "kekulization failure" naming the component when no matching exists.
MolGraph kekulize(const AromaticGraph& graph);

/// Canonical kekulé SMILES: depth-first over canonical order, ring-closure
/// numbers assigned as rings are opened (lowest free number).
std::string write_smiles(const MolGraph& g, const AtomVocab& vocab = AtomVocab::standard());

/// One entry of a newline-delimited SMILES file.
struct SmilesLine {
  std::size_t line_number = 0;
  std::string text;
};

/// Reads a SMILES file; blank lines and lines starting with '#' are skipped.
/// Only the first whitespace-separated field of a line is kept.
std::vector<SmilesLine> read_smiles_file(const std::filesystem::path& path);

}  // namespace ddtm
