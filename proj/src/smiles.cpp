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

#include "ddtm/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "ddtm/error.hpp"

namespace ddtm {
namespace {

// Default valence used to decide whether an aromatic atom still needs a
// double bond.
int aromatic_valence(std::string_view element) {
  if (element == "C") return 4;
  if (element == "N" || element == "P" || element == "B") return 3;
  if (element == "O" || element == "S") return 2;
  return 0;
}

bool aromatic_capable(std::string_view element) {
  return element == "B" || element == "C" || element == "N" || element == "O" || element == "P" ||
         element == "S";
}

class Parser {
 public:
  Parser(std::string_view text, const AtomVocab& vocab, const SmilesOptions& options)
      : text_(text), vocab_(vocab), options_(options) {}

  AromaticGraph run() {
    if (text_.empty()) throw SmilesError("empty SMILES", 0);
    graph_.atom_classes = vocab_.size();
    int previous = -1;  // last atom, -1 before the first
    std::vector<std::pair<int, std::size_t>> branches;  // (atom, offset of '(')
    std::optional<PendingBond> bond;
    bool expect_atom_after_dot = false;

    while (pos_ < text_.size()) {
      const std::size_t at = pos_;
      const char c = text_[pos_];
      if (c == '(') {
        if (previous < 0) throw SmilesError("branch without preceding atom", at);
        if (bond) throw SmilesError("bond before branch", at);
        branches.emplace_back(previous, at);
        ++pos_;
      } else if (c == ')') {
        if (branches.empty()) throw SmilesError("unbalanced parentheses", at);
        if (bond) throw SmilesError("dangling bond", bond->offset);
        previous = branches.back().first;
        branches.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':') {
        if (previous < 0) throw SmilesError("bond without preceding atom", at);
        if (bond) throw SmilesError("consecutive bond symbols", at);
        bond = PendingBond{c == '-' ? 1 : c == '=' ? 2 : c == '#' ? 3 : 1, c == ':', at};
        ++pos_;
      } else if (c == '/' || c == '\\') {
        throw SmilesError("stereo bonds are not supported", at);
      } else if (c == '$') {
        throw SmilesError("quadruple bonds are not supported", at);
      } else if (c == '.') {
        if (!options_.allow_fragments) throw SmilesError("multi-fragment SMILES are not supported", at);
        if (previous < 0 || bond || !branches.empty()) throw SmilesError("misplaced '.'", at);
        previous = -1;
        expect_atom_after_dot = true;
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (previous < 0) throw SmilesError("ring closure without preceding atom", at);
        const int ring = read_ring_number();
        ring_closure(ring, previous, bond, at);
        bond.reset();
      } else if (c == '*') {
        throw SmilesError("wildcard atoms are not supported", at);
      } else {
        const int atom = read_atom();
        if (previous >= 0) {
          add_edge(previous, atom, bond, at);
        } else if (bond) {
          throw SmilesError("bond without preceding atom", bond->offset);
        }
        bond.reset();
        previous = atom;
        expect_atom_after_dot = false;
      }
    }
    if (!branches.empty()) throw SmilesError("unbalanced parentheses", branches.back().second);
    if (bond) throw SmilesError("dangling bond", bond->offset);
    if (expect_atom_after_dot) throw SmilesError("misplaced '.'", text_.size() - 1);
    if (!open_rings_.empty()) {
      throw SmilesError("unmatched ring closure " + std::to_string(open_rings_.begin()->first),
                        open_rings_.begin()->second.offset);
    }
    return std::move(graph_);
  }

 private:
  struct PendingBond {
    int order;
    bool aromatic;
    std::size_t offset;
  };
  struct OpenRing {
    int atom;
    std::optional<PendingBond> bond;
    std::size_t offset;
  };

  int read_ring_number() {
    const std::size_t at = pos_;
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
        throw SmilesError("malformed two-digit ring closure", at);
      }
      const int ring = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
      if (ring == 0) throw SmilesError("ring closure 0 is not supported", at);
      return ring;
    }
    const int ring = text_[pos_] - '0';
    ++pos_;
    if (ring == 0) throw SmilesError("ring closure 0 is not supported", at);
    return ring;
  }

  int add_atom(std::string_view element, bool aromatic, int hydrogens, std::size_t at) {
    const auto index = vocab_.index_of(element);
    if (!index) throw SmilesError("unknown element " + std::string(element), at);
    if (aromatic && !aromatic_capable(element)) {
      throw SmilesError("element " + std::string(element) + " cannot be aromatic", at);
    }
    graph_.atoms.push_back({*index, aromatic, hydrogens, aromatic_valence(element), at});
    return static_cast<int>(graph_.atoms.size()) - 1;
  }

  int read_atom() {
    const std::size_t at = pos_;
    const char c = text_[pos_];
    if (c == '[') return read_bracket_atom();
    if (c == 'C' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
      pos_ += 2;
      return add_atom("Cl", false, 0, at);
    }
    if (c == 'B' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
      pos_ += 2;
      return add_atom("Br", false, 0, at);
    }
    switch (c) {
      case 'B': case 'C': case 'N': case 'O': case 'P': case 'S': case 'F': case 'I':
        ++pos_;
        return add_atom(std::string(1, c), false, 0, at);
      case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
        ++pos_;
        return add_atom(std::string(1, static_cast<char>(std::toupper(c))), true, 0, at);
      default:
        break;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      throw SmilesError("unknown element " + std::string(1, c), at);
    }
    throw SmilesError(std::string("unexpected character '") + c + "'", at);
  }

  int read_bracket_atom() {
    const std::size_t at = pos_;
    const std::size_t close = text_.find(']', pos_);
    if (close == std::string_view::npos) throw SmilesError("unterminated bracket atom", at);
    std::size_t p = pos_ + 1;
    if (p < close && std::isdigit(static_cast<unsigned char>(text_[p]))) {
      throw SmilesError("isotopes are not supported", p);
    }
    if (p >= close) throw SmilesError("empty bracket atom", at);
    std::string element;
    bool aromatic = false;
    if (std::isupper(static_cast<unsigned char>(text_[p]))) {
      element.push_back(text_[p++]);
      if (p < close && std::islower(static_cast<unsigned char>(text_[p]))) element.push_back(text_[p++]);
    } else if (std::islower(static_cast<unsigned char>(text_[p]))) {
      aromatic = true;
      element.push_back(static_cast<char>(std::toupper(text_[p++])));
      if (p < close && std::islower(static_cast<unsigned char>(text_[p]))) element.push_back(text_[p++]);
    } else {
      throw SmilesError("malformed bracket atom", p);
    }
    if (element == "H") throw SmilesError("explicit hydrogen atoms are not supported", at + 1);
    int hydrogens = 0;
    if (p < close && text_[p] == '@') throw SmilesError("stereochemistry is not supported", p);
    if (p < close && text_[p] == 'H') {
      ++p;
      hydrogens = 1;
      if (p < close && std::isdigit(static_cast<unsigned char>(text_[p]))) hydrogens = text_[p++] - '0';
    }
    if (p < close && (text_[p] == '+' || text_[p] == '-')) throw SmilesError("charges are not supported", p);
    if (p < close && text_[p] == ':') throw SmilesError("atom classes are not supported", p);
    if (p < close) throw SmilesError("malformed bracket atom", p);
    pos_ = close + 1;
    return add_atom(element, aromatic, hydrogens, at);
  }

  void add_edge(int a, int b, const std::optional<PendingBond>& bond, std::size_t at) {
    if (a == b) throw SmilesError("self-bond", at);
    for (const auto& e : graph_.edges) {
      if ((e.i == a && e.j == b) || (e.i == b && e.j == a)) throw SmilesError("duplicate bond", at);
    }
    AromaticGraph::Edge edge{a, b, 1, false};
    if (bond) {
      edge.bond_class = bond->order;
      edge.aromatic = bond->aromatic;
    } else {
      edge.aromatic = graph_.atoms[a].aromatic && graph_.atoms[b].aromatic;
    }
    if (edge.aromatic && !(graph_.atoms[a].aromatic && graph_.atoms[b].aromatic)) {
      throw SmilesError("aromatic bond between non-aromatic atoms", at);
    }
    graph_.edges.push_back(edge);
  }

  void ring_closure(int ring, int atom, const std::optional<PendingBond>& bond, std::size_t at) {
    auto it = open_rings_.find(ring);
    if (it == open_rings_.end()) {
      open_rings_.emplace(ring, OpenRing{atom, bond, at});
      return;
    }
    const OpenRing open = it->second;
    open_rings_.erase(it);
    std::optional<PendingBond> effective = open.bond;
    if (bond) {
      if (effective && (effective->order != bond->order || effective->aromatic != bond->aromatic)) {
        throw SmilesError("conflicting ring-closure bond symbols", at);
      }
      effective = bond;
    }
    add_edge(open.atom, atom, effective, at);
  }

  std::string_view text_;
  const AtomVocab& vocab_;
  SmilesOptions options_;
  std::size_t pos_ = 0;
  AromaticGraph graph_;
  std::map<int, OpenRing> open_rings_;
};

}  // namespace

AromaticGraph parse_smiles_raw(std::string_view text, const AtomVocab& vocab,
                               const SmilesOptions& options) {
  return Parser(text, vocab, options).run();
}

MolGraph parse_smiles(std::string_view text, const AtomVocab& vocab, const SmilesOptions& options) {
  return kekulize(parse_smiles_raw(text, vocab, options));
}

MolGraph kekulize(const AromaticGraph& graph) {
  const int n = static_cast<int>(graph.atoms.size());
  std::vector<int> order_sum(n, 0);
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // aromatic (neighbour, edge index)
  for (std::size_t k = 0; k < graph.edges.size(); ++k) {
    const auto& e = graph.edges[k];
    const int order = e.aromatic ? 1 : e.bond_class;
    order_sum[e.i] += order;
    order_sum[e.j] += order;
    if (e.aromatic) {
      adj[e.i].emplace_back(e.j, static_cast<int>(k));
      adj[e.j].emplace_back(e.i, static_cast<int>(k));
    }
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  for (int v = 0; v < n; ++v) {
    if (graph.atoms[v].aromatic && adj[v].empty()) {
      throw SmilesError("aromatic atom outside a ring", graph.atoms[v].offset);
    }
  }

  std::vector<int> bond_class(graph.edges.size());
  for (std::size_t k = 0; k < graph.edges.size(); ++k) {
    bond_class[k] = graph.edges[k].aromatic ? 1 : graph.edges[k].bond_class;
  }

  // An aromatic atom takes one double bond iff it still has a free valence.
  std::vector<char> needs(n, 0);
  for (int v = 0; v < n; ++v) {
    const auto& atom = graph.atoms[v];
    if (atom.aromatic && atom.default_valence - order_sum[v] - atom.hydrogens >= 1) needs[v] = 1;
  }

  std::vector<int> mate(n, -1);
  std::vector<int> mate_edge(n, -1);
  std::vector<char> seen(n, 0);
  for (int root = 0; root < n; ++root) {
    if (seen[root] || adj[root].empty()) continue;
    std::vector<int> members;
    std::vector<int> stack{root};
    seen[root] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      members.push_back(v);
      for (auto [w, k] : adj[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
    std::sort(members.begin(), members.end());
    std::vector<int> pending;
    for (int v : members) {
      if (needs[v]) pending.push_back(v);
    }
    // Backtracking perfect matching, pivoting on the lowest unmatched atom.
    std::function<bool()> match = [&]() -> bool {
      int pivot = -1;
      for (int v : pending) {
        if (mate[v] < 0) {
          pivot = v;
          break;
        }
      }
      if (pivot < 0) return true;
      for (auto [w, k] : adj[pivot]) {
        if (!needs[w] || mate[w] >= 0) continue;
        mate[pivot] = w;
        mate[w] = pivot;
        mate_edge[pivot] = mate_edge[w] = k;
        if (match()) return true;
        mate[pivot] = mate[w] = -1;
        mate_edge[pivot] = mate_edge[w] = -1;
      }
      return false;
    };
    if (pending.size() % 2 != 0 || !match()) {
      std::ostringstream out;
      out << "kekulization failure in aromatic component {";
      for (std::size_t k = 0; k < members.size(); ++k) out << (k ? "," : "") << members[k];
      out << "}";
      throw SmilesError(out.str(), graph.atoms[members.front()].offset);
    }
  }
  for (int v = 0; v < n; ++v) {
    if (mate_edge[v] >= 0) bond_class[mate_edge[v]] = 2;
  }

  std::vector<int> atoms(n);
  for (int v = 0; v < n; ++v) atoms[v] = graph.atoms[v].element;
  std::vector<BondSpec> bonds;
  bonds.reserve(graph.edges.size());
  for (std::size_t k = 0; k < graph.edges.size(); ++k) {
    bonds.push_back({graph.edges[k].i, graph.edges[k].j, bond_class[k]});
  }
  return MolGraph::create(n, std::move(atoms), bonds, graph.atom_classes);
}

// ---------------------------------------------------------------------------
// Writer.

namespace {

bool organic_subset(std::string_view symbol) {
  return symbol == "B" || symbol == "C" || symbol == "N" || symbol == "O" || symbol == "P" ||
         symbol == "S" || symbol == "F" || symbol == "Cl" || symbol == "Br" || symbol == "I";
}

const char* bond_symbol(int bond_class) {
  switch (bond_class) {
    case 2: return "=";
    case 3: return "#";
    default: return "";
  }
}

class Writer {
 public:
  Writer(const MolGraph& g, const AtomVocab& vocab) : g_(g), vocab_(vocab), n_(g.size()) {}

  std::string run() {
    const CanonicalLabeling labeling = canonical_labeling(g_);
    rank_.assign(n_, 0);
    for (int k = 0; k < n_; ++k) rank_[labeling.order[k]] = k;
    sorted_neighbors_.resize(n_);
    for (int v = 0; v < n_; ++v) {
      sorted_neighbors_[v] = g_.neighbors(v);
      std::sort(sorted_neighbors_[v].begin(), sorted_neighbors_[v].end(),
                [&](int a, int b) { return rank_[a] < rank_[b]; });
    }
    visited_.assign(n_, 0);
    parent_.assign(n_, -1);
    children_.assign(n_, {});
    closures_.assign(n_, {});
    std::string out;
    for (int k = 0; k < n_; ++k) {
      const int root = labeling.order[k];
      if (visited_[root]) continue;
      discover(root);
      if (!out.empty()) out.push_back('.');
      emit(root, out);
    }
    return out;
  }

 private:
  void discover(int v) {
    visited_[v] = 1;
    for (int w : sorted_neighbors_[v]) {
      if (w == parent_[v]) continue;
      if (visited_[w]) {
        // Back edge to an ancestor, recorded once from the descendant side.
        if (std::find(closures_[w].begin(), closures_[w].end(), v) == closures_[w].end()) {
          closures_[v].push_back(w);
          closures_[w].push_back(v);
        }
        continue;
      }
      parent_[w] = v;
      children_[v].push_back(w);
      discover(w);
    }
  }

  std::string atom_text(int v) const {
    const std::string& symbol = vocab_.symbol(g_.atom(v));
    return organic_subset(symbol) ? symbol : "[" + symbol + "]";
  }

  void emit(int v, std::string& out) {
    out += atom_text(v);
    std::vector<int> ring_partners = closures_[v];
    std::sort(ring_partners.begin(), ring_partners.end(),
              [&](int a, int b) { return rank_[a] < rank_[b]; });
    // Close rings opened by ancestors first, then open new ones.
    for (int w : ring_partners) {
      auto it = open_.find(std::minmax(v, w));
      if (it == open_.end()) continue;
      out += ring_label(it->second);
      free_numbers_.push_back(it->second);
      std::sort(free_numbers_.begin(), free_numbers_.end());
      open_.erase(it);
    }
    for (int w : ring_partners) {
      const auto key = std::minmax(v, w);
      if (open_.count(key) || closed_.count(key)) continue;
      int number;
      if (!free_numbers_.empty()) {
        number = free_numbers_.front();
        free_numbers_.erase(free_numbers_.begin());
      } else {
        number = ++highest_number_;
      }
      out += bond_symbol(g_.bond(v, w));
      out += ring_label(number);
      open_.emplace(key, number);
      closed_.insert(key);
    }
    const auto& kids = children_[v];
    for (std::size_t k = 0; k < kids.size(); ++k) {
      const bool branch = k + 1 < kids.size();
      if (branch) out.push_back('(');
      out += bond_symbol(g_.bond(v, kids[k]));
      emit(kids[k], out);
      if (branch) out.push_back(')');
    }
  }

  static std::string ring_label(int number) {
    if (number < 10) return std::to_string(number);
    return "%" + std::to_string(number);
  }

  const MolGraph& g_;
  const AtomVocab& vocab_;
  int n_;
  std::vector<int> rank_;
  std::vector<std::vector<int>> sorted_neighbors_;
  std::vector<char> visited_;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> closures_;
  std::map<std::pair<int, int>, int> open_;
  std::set<std::pair<int, int>> closed_;
  std::vector<int> free_numbers_;
  int highest_number_ = 0;
};

}  // namespace

std::string write_smiles(const MolGraph& g, const AtomVocab& vocab) {
  if (g.atom_classes() > vocab.size()) throw UsageError("write_smiles: graph classes exceed vocabulary");
  return Writer(g, vocab).run();
}

std::vector<SmilesLine> read_smiles_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open SMILES file " + path.string());
  std::vector<SmilesLine> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first) || first.front() == '#') continue;
    out.push_back({number, first});
  }
  return out;
}

}  // namespace ddtm
