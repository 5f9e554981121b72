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

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ddtm {

/// Amino-acid alphabet accepted in sequences: the 20 standard residues plus
/// B, Z and X.
inline constexpr std::string_view kAminoAcids = "ACDEFGHIKLMNPQRSTVWYBZX";

struct ProteinSequence {
  std::string id;
  std::string residues;

  /// Throws DataError when empty or containing a letter outside kAminoAcids.
  void validate() const;
};

/// Sequence-level summary vector plus one vector per residue.
struct ProteinEmbedding {
  std::string id;
  int dim = 0;
  std::vector<double> cls;     // dim
  std::vector<double> tokens;  // length x dim, row-major

  int length() const { return dim == 0 ? 0 : static_cast<int>(tokens.size()) / dim; }
};

using EmbeddingMap = std::map<std::string, ProteinEmbedding>;

/// Deterministic stand-in encoder. Token i is the L2-normalized bag of hashed
/// k-mers (FNV-1a modulo dim) over every k-window covering residue i; cls is
/// the mean token. Throws UsageError for dim < 8 or k outside [1, 5] and
/// DataError for an invalid sequence.
ProteinEmbedding kmer_encode(const ProteinSequence& protein, int dim, int k);

/// Bucket index of one k-mer under kmer_encode.
int kmer_bucket(std::string_view kmer, int dim);

/// Reads newline-delimited JSON records {"id", "cls", "tokens"}. Throws
/// DataError naming the line for malformed records, a dimension mismatch, or a
/// duplicate id. An empty file yields an empty map.
EmbeddingMap load_embeddings(const std::filesystem::path& path);

/// Writes the same format load_embeddings reads.
void save_embeddings(const EmbeddingMap& embeddings, const std::filesystem::path& path);

/// FASTA: '>' header (id is the first whitespace-separated word), sequence
/// lines concatenated. Throws DataError for sequence data before a header,
/// duplicate ids, or invalid residues.
std::vector<ProteinSequence> read_fasta(const std::filesystem::path& path);

enum class Fusion { kCrossAttention, kConcat, kVirtualNode, kNone };

std::string_view fusion_name(Fusion fusion);
/// Accepts "ca", "cat", "vn" (and "none"); throws UsageError otherwise.
Fusion parse_fusion(std::string_view name);

/// Conditioning input for one molecule. For kCrossAttention, `tokens` holds the
/// residues of both proteins with a placeholder row at `separator_row` that the
/// denoiser fills with its learned separator. For kConcat / kVirtualNode,
/// `pooled` is the two cls vectors concatenated. kNone carries no payload.
struct ConditionContext {
  Fusion strategy = Fusion::kNone;
  int dim = 0;
  std::vector<double> tokens;  // rows x dim
  int rows = 0;
  int separator_row = -1;
  std::vector<double> pooled;  // 2 * dim

  bool is_null() const { return strategy == Fusion::kNone; }
  static ConditionContext null_context(int dim = 0) { return {Fusion::kNone, dim, {}, 0, -1, {}}; }
};

/// Throws UsageError when the two embeddings differ in width.
ConditionContext pair_context(const ProteinEmbedding& a, const ProteinEmbedding& b, Fusion strategy);

}  // namespace ddtm
