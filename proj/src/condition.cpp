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

#include "ddtm/condition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

#include "ddtm/error.hpp"
#include "ddtm/molgraph.hpp"

namespace ddtm {

void ProteinSequence::validate() const {
  if (residues.empty()) throw DataError("protein " + id + ": empty sequence");
  for (std::size_t k = 0; k < residues.size(); ++k) {
    if (kAminoAcids.find(residues[k]) == std::string_view::npos) {
      throw DataError("protein " + id + ": invalid residue '" + std::string(1, residues[k]) +
                      "' at position " + std::to_string(k));
    }
  }
}

int kmer_bucket(std::string_view kmer, int dim) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(kmer.data());
  return static_cast<int>(fnv1a64({bytes, kmer.size()}) % static_cast<std::uint64_t>(dim));
}

ProteinEmbedding kmer_encode(const ProteinSequence& protein, int dim, int k) {
  if (dim < 8) throw UsageError("kmer_encode: dim must be at least 8");
  if (k < 1 || k > 5) throw UsageError("kmer_encode: k must be in [1, 5]");
  protein.validate();
  const int length = static_cast<int>(protein.residues.size());
  const int window = std::min(k, length);
  const std::string_view seq = protein.residues;

  ProteinEmbedding out;
  out.id = protein.id;
  out.dim = dim;
  out.tokens.assign(static_cast<std::size_t>(length) * dim, 0.0);
  out.cls.assign(dim, 0.0);
  std::vector<int> counts(dim);
  for (int i = 0; i < length; ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    const int first = std::max(0, i - window + 1);
    const int last = std::min(i, length - window);
    for (int s = first; s <= last; ++s) ++counts[kmer_bucket(seq.substr(s, window), dim)];
    long long squared = 0;
    for (int c : counts) squared += static_cast<long long>(c) * c;
    const double norm = std::sqrt(static_cast<double>(squared));
    for (int c = 0; c < dim; ++c) {
      out.tokens[static_cast<std::size_t>(i) * dim + c] = counts[c] / norm;
    }
  }
  for (int i = 0; i < length; ++i) {
    for (int c = 0; c < dim; ++c) out.cls[c] += out.tokens[static_cast<std::size_t>(i) * dim + c];
  }
  for (double& v : out.cls) v /= length;
  return out;
}

namespace {

std::vector<double> read_vector(const nlohmann::json& value, const std::string& where) {
  if (!value.is_array()) throw DataError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& x : value) {
    if (!x.is_number()) throw DataError(where + ": expected an array of numbers");
    const double v = x.get<double>();
    if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
    out.push_back(v);
  }
  return out;
}

}  // namespace

EmbeddingMap load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path.string());
  EmbeddingMap out;
  int dim = -1;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(number);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed record (" + e.what() + ")");
    }
    if (!record.is_object() || !record.contains("id") || !record["id"].is_string() ||
        !record.contains("cls") || !record.contains("tokens")) {
      throw DataError(where + ": malformed record (need id, cls, tokens)");
    }
    ProteinEmbedding e;
    e.id = record["id"].get<std::string>();
    e.cls = read_vector(record["cls"], where);
    e.dim = static_cast<int>(e.cls.size());
    if (e.dim == 0) throw DataError(where + ": empty cls vector");
    if (dim < 0) dim = e.dim;
    if (e.dim != dim) {
      throw DataError(where + ": dimension mismatch (cls has " + std::to_string(e.dim) +
                      ", expected " + std::to_string(dim) + ")");
    }
    if (!record["tokens"].is_array() || record["tokens"].empty()) {
      throw DataError(where + ": tokens must be a nonempty array");
    }
    for (const auto& row : record["tokens"]) {
      const std::vector<double> v = read_vector(row, where);
      if (static_cast<int>(v.size()) != dim) {
        throw DataError(where + ": dimension mismatch (token has " + std::to_string(v.size()) +
                        ", expected " + std::to_string(dim) + ")");
      }
      e.tokens.insert(e.tokens.end(), v.begin(), v.end());
    }
    if (out.count(e.id)) throw DataError(where + ": duplicate id " + e.id);
    out.emplace(e.id, std::move(e));
  }
  return out;
}

void save_embeddings(const EmbeddingMap& embeddings, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embedding file " + path.string());
  for (const auto& [id, e] : embeddings) {
    nlohmann::json record;
    record["id"] = id;
    record["cls"] = e.cls;
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < e.length(); ++i) {
      rows.push_back(std::vector<double>(e.tokens.begin() + static_cast<std::ptrdiff_t>(i) * e.dim,
                                         e.tokens.begin() + static_cast<std::ptrdiff_t>(i + 1) * e.dim));
    }
    record["tokens"] = std::move(rows);
    out << record.dump() << '\n';
  }
}

std::vector<ProteinSequence> read_fasta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open FASTA file " + path.string());
  std::vector<ProteinSequence> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '>') {
      const std::string header = line.substr(1);
      std::string id = header.substr(0, header.find_first_of(" \t"));
      if (id.empty()) throw DataError(path.string() + ":" + std::to_string(number) + ": empty FASTA id");
      if (!ids.insert(id).second) {
        throw DataError(path.string() + ":" + std::to_string(number) + ": duplicate FASTA id " + id);
      }
      out.push_back({std::move(id), {}});
      continue;
    }
    if (out.empty()) {
      throw DataError(path.string() + ":" + std::to_string(number) + ": sequence before header");
    }
    for (char c : line) {
      if (c != ' ' && c != '\t') out.back().residues.push_back(c);
    }
  }
  for (const auto& p : out) p.validate();
  return out;
}

std::string_view fusion_name(Fusion fusion) {
  switch (fusion) {
    case Fusion::kCrossAttention: return "ca";
    case Fusion::kConcat: return "cat";
    case Fusion::kVirtualNode: return "vn";
    case Fusion::kNone: return "none";
  }
  return "none";
}

Fusion parse_fusion(std::string_view name) {
  if (name == "ca") return Fusion::kCrossAttention;
  if (name == "cat") return Fusion::kConcat;
  if (name == "vn") return Fusion::kVirtualNode;
  if (name == "none") return Fusion::kNone;
  throw UsageError("unknown fusion strategy '" + std::string(name) + "' (expected ca, cat or vn)");
}

ConditionContext pair_context(const ProteinEmbedding& a, const ProteinEmbedding& b, Fusion strategy) {
  if (a.dim != b.dim) {
    throw UsageError("pair_context: embedding widths differ (" + std::to_string(a.dim) + " vs " +
                     std::to_string(b.dim) + ")");
  }
  ConditionContext ctx;
  ctx.strategy = strategy;
  ctx.dim = a.dim;
  switch (strategy) {
    case Fusion::kCrossAttention:
      ctx.rows = a.length() + 1 + b.length();
      ctx.separator_row = a.length();
      ctx.tokens = a.tokens;
      ctx.tokens.resize(ctx.tokens.size() + a.dim, 0.0);
      ctx.tokens.insert(ctx.tokens.end(), b.tokens.begin(), b.tokens.end());
      break;
    case Fusion::kConcat:
    case Fusion::kVirtualNode:
      ctx.pooled = a.cls;
      ctx.pooled.insert(ctx.pooled.end(), b.cls.begin(), b.cls.end());
      break;
    case Fusion::kNone:
      break;
  }
  return ctx;
}

}  // namespace ddtm
