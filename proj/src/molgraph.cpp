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

#include "ddtm/molgraph.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "ddtm/error.hpp"

namespace ddtm {

AtomVocab::AtomVocab(std::vector<std::string> symbols, std::vector<int> max_valence)
    : symbols_(std::move(symbols)), valences_(std::move(max_valence)) {
  if (symbols_.size() != valences_.size()) {
    throw UsageError("atom vocabulary: symbol and valence lists differ in length");
  }
  if (symbols_.empty()) throw UsageError("atom vocabulary is empty");
  std::set<std::string> seen;
  for (std::size_t k = 0; k < symbols_.size(); ++k) {
    if (!seen.insert(symbols_[k]).second) {
      throw UsageError("atom vocabulary: duplicate symbol " + symbols_[k]);
    }
    if (valences_[k] <= 0) {
      throw UsageError("atom vocabulary: non-positive valence for " + symbols_[k]);
    }
  }
}

const AtomVocab& AtomVocab::standard() {
  static const AtomVocab vocab({"C", "N", "O", "F", "P", "S", "Cl", "Br", "I"},
                               {4, 3, 2, 1, 5, 6, 1, 1, 1});
  return vocab;
}

std::optional<int> AtomVocab::index_of(std::string_view symbol) const {
  for (std::size_t k = 0; k < symbols_.size(); ++k) {
    if (symbols_[k] == symbol) return static_cast<int>(k);
  }
  return std::nullopt;
}

MolGraph MolGraph::create(int n, std::vector<int> atoms, std::span<const BondSpec> bonds,
                          int atom_classes, int bond_classes) {
  if (n < 0) throw DataError("graph: negative node count");
  if (atom_classes < 1 || bond_classes < 2) throw UsageError("graph: bad class counts");
  if (static_cast<int>(atoms.size()) != n) {
    throw DataError("graph: expected " + std::to_string(n) + " atoms, got " +
                    std::to_string(atoms.size()));
  }
  for (int i = 0; i < n; ++i) {
    if (atoms[i] < 0 || atoms[i] >= atom_classes) {
      throw DataError("graph: atom " + std::to_string(i) + " has out-of-range class " +
                      std::to_string(atoms[i]));
    }
  }
  std::vector<std::uint8_t> matrix(static_cast<std::size_t>(n) * n, 0);
  std::set<std::pair<int, int>> seen;
  for (const BondSpec& bond : bonds) {
    const std::string pair = "(" + std::to_string(bond.i) + "," + std::to_string(bond.j) + ")";
    if (bond.i < 0 || bond.i >= n || bond.j < 0 || bond.j >= n) {
      throw DataError("graph: out-of-range index in bond " + pair);
    }
    if (bond.i == bond.j) throw DataError("graph: self-bond " + pair);
    if (bond.bond_class < 0 || bond.bond_class >= bond_classes) {
      throw DataError("graph: out-of-range bond class in bond " + pair);
    }
    if (!seen.insert(std::minmax(bond.i, bond.j)).second) {
      throw DataError("graph: duplicate bond " + pair);
    }
    matrix[static_cast<std::size_t>(bond.i) * n + bond.j] = static_cast<std::uint8_t>(bond.bond_class);
    matrix[static_cast<std::size_t>(bond.j) * n + bond.i] = static_cast<std::uint8_t>(bond.bond_class);
  }
  MolGraph g;
  g.n_ = n;
  g.f_ = atom_classes;
  g.b_ = bond_classes;
  g.atoms_ = std::move(atoms);
  g.bonds_ = std::move(matrix);
  return g;
}

MolGraph MolGraph::from_dense(std::vector<int> atoms, std::vector<std::uint8_t> bonds,
                              int atom_classes, int bond_classes) {
  const int n = static_cast<int>(atoms.size());
  if (bonds.size() != static_cast<std::size_t>(n) * n) {
    throw DataError("graph: bond matrix has wrong size");
  }
  for (int i = 0; i < n; ++i) {
    if (atoms[i] < 0 || atoms[i] >= atom_classes) throw DataError("graph: atom class out of range");
    if (bonds[static_cast<std::size_t>(i) * n + i] != 0) throw DataError("graph: self-bond on diagonal");
    for (int j = i + 1; j < n; ++j) {
      const auto a = bonds[static_cast<std::size_t>(i) * n + j];
      if (a != bonds[static_cast<std::size_t>(j) * n + i]) throw DataError("graph: asymmetric bond matrix");
      if (a >= bond_classes) throw DataError("graph: bond class out of range");
    }
  }
  MolGraph g;
  g.n_ = n;
  g.f_ = atom_classes;
  g.b_ = bond_classes;
  g.atoms_ = std::move(atoms);
  g.bonds_ = std::move(bonds);
  return g;
}

int MolGraph::degree(int i) const {
  int d = 0;
  for (int j = 0; j < n_; ++j) d += adjacent(i, j) ? 1 : 0;
  return d;
}

int MolGraph::bond_order_sum(int i) const {
  int s = 0;
  for (int j = 0; j < n_; ++j) s += bond(i, j);
  return s;
}

std::vector<int> MolGraph::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j) {
    if (adjacent(i, j)) out.push_back(j);
  }
  return out;
}

std::vector<BondSpec> MolGraph::bond_list() const {
  std::vector<BondSpec> out;
  for (int i = 0; i < n_; ++i) {
    for (int j = i + 1; j < n_; ++j) {
      if (adjacent(i, j)) out.push_back({i, j, bond(i, j)});
    }
  }
  return out;
}

std::vector<double> MolGraph::one_hot_atoms() const {
  std::vector<double> x(static_cast<std::size_t>(n_) * f_, 0.0);
  for (int i = 0; i < n_; ++i) x[static_cast<std::size_t>(i) * f_ + atoms_[i]] = 1.0;
  return x;
}

std::vector<double> MolGraph::one_hot_bonds() const {
  std::vector<double> e(static_cast<std::size_t>(n_) * n_ * b_, 0.0);
  for (std::size_t p = 0; p < bonds_.size(); ++p) e[p * b_ + bonds_[p]] = 1.0;
  return e;
}

MolGraph permute(const MolGraph& g, std::span<const int> perm) {
  const int n = g.size();
  if (static_cast<int>(perm.size()) != n) throw UsageError("permute: permutation has wrong length");
  std::vector<char> hit(n, 0);
  for (int p : perm) {
    if (p < 0 || p >= n || hit[p]) throw UsageError("permute: not a bijection");
    hit[p] = 1;
  }
  std::vector<int> atoms(n);
  std::vector<std::uint8_t> bonds(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    atoms[perm[i]] = g.atom(i);
    for (int j = 0; j < n; ++j) {
      bonds[static_cast<std::size_t>(perm[i]) * n + perm[j]] = static_cast<std::uint8_t>(g.bond(i, j));
    }
  }
  return MolGraph::from_dense(std::move(atoms), std::move(bonds), g.atom_classes(), g.bond_classes());
}

std::vector<int> invert_permutation(std::span<const int> perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv.at(perm[i]) = static_cast<int>(i);
  return inv;
}

ValidityResult check_validity(const MolGraph& g, const AtomVocab& vocab) {
  ValidityResult result;
  for (int i = 0; i < g.size(); ++i) {
    const int sum = g.bond_order_sum(i);
    const int cap = g.atom(i) < vocab.size() ? vocab.max_valence(g.atom(i)) : 0;
    if (sum > cap) {
      result.valid = false;
      result.violations.push_back({i, sum, cap});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Canonical labelling.

namespace {

using Coloring = std::vector<int>;

// Replaces arbitrary sortable keys by their dense rank.
template <typename Key>
Coloring rank_keys(const std::vector<Key>& keys) {
  std::vector<Key> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  Coloring out(keys.size());
  for (std::size_t v = 0; v < keys.size(); ++v) {
    out[v] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), keys[v]) - sorted.begin());
  }
  return out;
}

int count_colors(const Coloring& c) {
  return c.empty() ? 0 : *std::max_element(c.begin(), c.end()) + 1;
}

class Canonicalizer {
 public:
  explicit Canonicalizer(const MolGraph& g) : g_(g), n_(g.size()) {
    adj_.resize(n_);
    for (int v = 0; v < n_; ++v) adj_[v] = g.neighbors(v);
  }

  CanonicalLabeling run() {
    using Initial = std::tuple<int, int, std::vector<int>>;
    std::vector<Initial> keys(n_);
    for (int v = 0; v < n_; ++v) {
      std::vector<int> orders;
      for (int w : adj_[v]) orders.push_back(g_.bond(v, w));
      std::sort(orders.begin(), orders.end());
      keys[v] = {g_.atom(v), static_cast<int>(adj_[v].size()), std::move(orders)};
    }
    search(refine(rank_keys(keys)));
    CanonicalLabeling out;
    out.order = best_order_;
    out.key = render_key();
    return out;
  }

 private:
  Coloring refine(Coloring colors) const {
    using Signature = std::pair<int, std::vector<std::pair<int, int>>>;
    int classes = count_colors(colors);
    for (;;) {
      std::vector<Signature> sig(n_);
      for (int v = 0; v < n_; ++v) {
        sig[v].first = colors[v];
        for (int w : adj_[v]) sig[v].second.emplace_back(g_.bond(v, w), colors[w]);
        std::sort(sig[v].second.begin(), sig[v].second.end());
      }
      Coloring next = rank_keys(sig);
      const int next_classes = count_colors(next);
      colors = std::move(next);
      if (next_classes == classes) return colors;
      classes = next_classes;
    }
  }

  // Transposing u and v is an automorphism iff they agree on every other pair.
  bool twins(int u, int v) const {
    if (g_.atom(u) != g_.atom(v)) return false;
    for (int w = 0; w < n_; ++w) {
      if (w == u || w == v) continue;
      if (g_.bond(u, w) != g_.bond(v, w)) return false;
    }
    return true;
  }

  void search(const Coloring& colors) {
    if (count_colors(colors) == n_) {
      consider_leaf(colors);
      return;
    }
    // First (smallest) non-singleton cell.
    std::vector<int> cell_size(n_, 0);
    for (int c : colors) ++cell_size[c];
    int target = 0;
    while (cell_size[target] < 2) ++target;
    std::vector<int> cell;
    for (int v = 0; v < n_; ++v) {
      if (colors[v] == target) cell.push_back(v);
    }
    std::vector<int> representatives;
    for (int v : cell) {
      bool covered = false;
      for (int r : representatives) {
        if (twins(r, v)) {
          covered = true;
          break;
        }
      }
      if (!covered) representatives.push_back(v);
    }
    for (int v : representatives) {
      Coloring split(n_);
      for (int w = 0; w < n_; ++w) split[w] = 2 * colors[w];
      split[v] = 2 * colors[v] - 1;
      search(refine(rank_keys(split)));
    }
  }

  void consider_leaf(const Coloring& colors) {
    std::vector<int> order(n_);
    for (int v = 0; v < n_; ++v) order[colors[v]] = v;
    std::vector<int> code;
    code.reserve(n_ + static_cast<std::size_t>(n_) * (n_ - 1) / 2);
    for (int k = 0; k < n_; ++k) code.push_back(g_.atom(order[k]));
    for (int p = 0; p < n_; ++p) {
      for (int q = p + 1; q < n_; ++q) code.push_back(g_.bond(order[p], order[q]));
    }
    if (best_order_.empty() || code < best_code_) {
      best_code_ = std::move(code);
      best_order_ = std::move(order);
    }
  }

  std::string render_key() const {
    std::ostringstream out;
    out << n_ << ':';
    for (int k = 0; k < n_; ++k) out << (k ? "," : "") << best_code_[k];
    out << ';';
    bool first = true;
    std::size_t pos = n_;
    for (int p = 0; p < n_; ++p) {
      for (int q = p + 1; q < n_; ++q, ++pos) {
        if (best_code_[pos] == 0) continue;
        out << (first ? "" : ",") << p << '-' << q << '=' << best_code_[pos];
        first = false;
      }
    }
    return out.str();
  }

  const MolGraph& g_;
  int n_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> best_code_;
  std::vector<int> best_order_;
};

void hash_u64(std::uint64_t& h, std::uint64_t value) {
  std::uint8_t bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<std::uint8_t>(value >> (8 * k));
  h = fnv1a64(bytes, h);
}

}  // namespace

CanonicalLabeling canonical_labeling(const MolGraph& g) {
  if (g.size() == 0) return {{}, "0:;"};
  return Canonicalizer(g).run();
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Fingerprint fingerprint(const MolGraph& g, int radius, std::uint32_t nbits) {
  if (radius < 0) throw UsageError("fingerprint: negative radius");
  if (nbits == 0 || (nbits & (nbits - 1)) != 0) {
    throw UsageError("fingerprint: nbits must be a power of two");
  }
  const int n = g.size();
  std::vector<std::uint64_t> ids(n);
  std::set<std::uint32_t> bits;
  for (int v = 0; v < n; ++v) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    hash_u64(h, 0);
    hash_u64(h, static_cast<std::uint64_t>(g.atom(v)));
    ids[v] = h;
    bits.insert(static_cast<std::uint32_t>(h & (nbits - 1)));
  }
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(n);
    for (int v = 0; v < n; ++v) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
      for (int w : g.neighbors(v)) env.emplace_back(static_cast<std::uint64_t>(g.bond(v, w)), ids[w]);
      std::sort(env.begin(), env.end());
      std::uint64_t h = 0xcbf29ce484222325ULL;
      hash_u64(h, static_cast<std::uint64_t>(r));
      hash_u64(h, ids[v]);
      for (const auto& [bond, id] : env) {
        hash_u64(h, bond);
        hash_u64(h, id);
      }
      next[v] = h;
      bits.insert(static_cast<std::uint32_t>(h & (nbits - 1)));
    }
    ids = std::move(next);
  }
  return {nbits, std::vector<std::uint32_t>(bits.begin(), bits.end())};
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.nbits != b.nbits) throw UsageError("tanimoto: fingerprint widths differ");
  if (a.bits.empty() && b.bits.empty()) return 1.0;
  std::size_t common = 0;
  auto ia = a.bits.begin();
  auto ib = b.bits.begin();
  while (ia != a.bits.end() && ib != b.bits.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const std::size_t total = a.bits.size() + b.bits.size() - common;
  return static_cast<double>(common) / static_cast<double>(total);
}

}  // namespace ddtm
