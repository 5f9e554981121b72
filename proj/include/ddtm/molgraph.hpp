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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ddtm {

/// Bond classes. Class 0 is "no bond"; for the default four-class space the
/// class index equals the bond order.
enum class Bond : std::uint8_t { kNone = 0, kSingle = 1, kDouble = 2, kTriple = 3 };

inline constexpr int kDefaultBondClasses = 4;

/// Ordered element symbols with their maximum valence (sum of bond orders,
/// hydrogens implicit).
class AtomVocab {
 public:
  AtomVocab(std::vector<std::string> symbols, std::vector<int> max_valence);

  /// {C, N, O, F, P, S, Cl, Br, I} with valences {4, 3, 2, 1, 5, 6, 1, 1, 1}.
  static const AtomVocab& standard();

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::string& symbol(int index) const { return symbols_.at(index); }
  int max_valence(int index) const { return valences_.at(index); }
  std::optional<int> index_of(std::string_view symbol) const;

  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::vector<int>& valences() const { return valences_; }

  bool operator==(const AtomVocab&) const = default;

 private:
  std::vector<std::string> symbols_;
  std::vector<int> valences_;
};

struct BondSpec {
  int i;
  int j;
  int bond_class;
};

/// Molecular graph G = (X, E): one categorical atom class per node and one
/// categorical bond class per unordered node pair. Stored as class indices;
/// the one-hot tensors are views over them. Symmetry and the no-bond diagonal
/// hold by construction.
class MolGraph {
 public:
  MolGraph() = default;

  /// Validating constructor. Unlisted pairs get class 0. Throws DataError on an
  /// out-of-range index, a self-bond, or a duplicate pair.
  static MolGraph create(int n, std::vector<int> atoms, std::span<const BondSpec> bonds,
                         int atom_classes, int bond_classes = kDefaultBondClasses);

  /// Builds from a full class matrix (row-major n*n). The matrix must already be
  /// symmetric with a zero diagonal.
  static MolGraph from_dense(std::vector<int> atoms, std::vector<std::uint8_t> bonds,
                             int atom_classes, int bond_classes = kDefaultBondClasses);

  int size() const { return n_; }
  int atom_classes() const { return f_; }
  int bond_classes() const { return b_; }

  int atom(int i) const { return atoms_[i]; }
  int bond(int i, int j) const { return bonds_[static_cast<std::size_t>(i) * n_ + j]; }
  bool adjacent(int i, int j) const { return bond(i, j) != 0; }

  const std::vector<int>& atoms() const { return atoms_; }
  const std::vector<std::uint8_t>& bond_matrix() const { return bonds_; }

  /// Number of bonded neighbours of i.
  int degree(int i) const;
  /// Sum of bond orders at i (bond class index taken as order).
  int bond_order_sum(int i) const;
  /// Neighbours of i in increasing index order.
  std::vector<int> neighbors(int i) const;
  /// Bonded pairs (i < j) with their classes.
  std::vector<BondSpec> bond_list() const;

  /// One-hot atom matrix X (n x f), row-major.
  std::vector<double> one_hot_atoms() const;
  /// One-hot bond tensor E (n x n x b), row-major.
  std::vector<double> one_hot_bonds() const;

  bool operator==(const MolGraph&) const = default;

 private:
  int n_ = 0;
  int f_ = 0;
  int b_ = kDefaultBondClasses;
  std::vector<int> atoms_;
  std::vector<std::uint8_t> bonds_;
};

/// Relabels nodes: node i of `g` becomes node perm[i]. Throws UsageError if
/// `perm` is not a bijection on [0, n).
MolGraph permute(const MolGraph& g, std::span<const int> perm);

/// Inverse of a permutation.
std::vector<int> invert_permutation(std::span<const int> perm);

struct ValenceViolation {
  int atom;
  int bond_order_sum;
  int max_valence;
};

struct ValidityResult {
  bool valid = true;
  std::vector<ValenceViolation> violations;
};

/// Valence check: every atom's bond-order sum must not exceed the maximum
/// valence of its element.
ValidityResult check_validity(const MolGraph& g, const AtomVocab& vocab);

inline bool is_valid(const MolGraph& g, const AtomVocab& vocab) {
  return check_validity(g, vocab).valid;
}

/// Canonical labelling. `order[k]` is the original index of the node placed at
/// canonical position k.
struct CanonicalLabeling {
  std::vector<int> order;
  std::string key;
};

/// Exact canonical labelling by colour refinement plus individualization with
/// search over all label-independent branches (twin branches pruned).
CanonicalLabeling canonical_labeling(const MolGraph& g);

/// Permutation-invariant identity key.
inline std::string canonical_form(const MolGraph& g) { return canonical_labeling(g).key; }

/// Bit-set fingerprint; `bits` is sorted and unique.
struct Fingerprint {
  std::uint32_t nbits = 0;
  std::vector<std::uint32_t> bits;

  bool operator==(const Fingerprint&) const = default;
};

inline constexpr int kDefaultFingerprintRadius = 2;
inline constexpr std::uint32_t kDefaultFingerprintBits = 2048;

/// Circular fingerprint: radius-0 identifiers hash the atom class only; each
/// further layer hashes the previous identifier with the sorted multiset of
/// (bond class, neighbour identifier). Identifiers are folded modulo nbits.
Fingerprint fingerprint(const MolGraph& g, int radius = kDefaultFingerprintRadius,
                        std::uint32_t nbits = kDefaultFingerprintBits);

/// |a & b| / |a | b|; 1.0 when both are empty. Throws UsageError on width mismatch.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace ddtm
