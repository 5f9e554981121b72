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

#include "ddtm/sampler.hpp"

#include <algorithm>
#include <charconv>

#include "ddtm/error.hpp"
#include "ddtm/smiles.hpp"

namespace ddtm {

int sample_node_count(const NodeCountHistogram& histogram, Rng& rng) {
  histogram.validate();
  std::vector<int> sizes;
  std::vector<double> weights;
  for (const auto& [n, p] : histogram.probabilities) {
    sizes.push_back(n);
    weights.push_back(p);
  }
  return sizes[sample_categorical(weights, rng)];
}

namespace {

// Normalized posteriors q(. | x^t, x^0) for one step; empty rows mark x^0
// values that cannot reach x^t.
class PosteriorTable {
 public:
  PosteriorTable(int t, const NoiseSchedule& schedule, std::span<const double> marginal)
      : k_(static_cast<int>(marginal.size())), rows_(static_cast<std::size_t>(k_) * k_) {
    for (int xt = 0; xt < k_; ++xt) {
      for (int x0 = 0; x0 < k_; ++x0) {
        auto terms = posterior_unnormalized(xt, x0, t, schedule, marginal);
        double z = 0.0;
        for (double v : terms) z += v;
        if (z > 0.0) {
          for (double& v : terms) v /= z;
          rows_[static_cast<std::size_t>(xt) * k_ + x0] = std::move(terms);
        }
      }
    }
  }

  std::vector<double> mix(int xt, std::span<const double> predicted) const {
    std::vector<double> out(k_, 0.0);
    double total = 0.0;
    for (int x0 = 0; x0 < k_; ++x0) {
      const auto& row = rows_[static_cast<std::size_t>(xt) * k_ + x0];
      if (row.empty() || predicted[x0] == 0.0) continue;
      for (int y = 0; y < k_; ++y) out[y] += predicted[x0] * row[y];
      total += predicted[x0];
    }
    if (!(total > 0.0)) throw NumericError("reverse step: no predicted class can reach the current state");
    for (double& v : out) v /= total;
    return out;
  }

 private:
  int k_;
  std::vector<std::vector<double>> rows_;
};

int argmax(std::span<const double> p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

std::vector<double> reverse_mixture(int xt, std::span<const double> predicted, int t, const NoiseSchedule& schedule,
                                    std::span<const double> marginal) {
  if (predicted.size() != marginal.size()) throw UsageError("reverse_mixture: class counts differ");
  return PosteriorTable(t, schedule, marginal).mix(xt, predicted);
}

ReverseDistributions reverse_distributions(const PredictedDistributions& pred, const MolGraph& noisy, int t,
                                           const NoiseSchedule& schedule, const Marginals& marginals) {
  if (t < 1 || t > schedule.steps()) {
    throw UsageError("reverse step: t=" + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps()) +
                     "]");
  }
  const int n = noisy.size();
  const PosteriorTable atom_table(t, schedule, marginals.atoms);
  const PosteriorTable bond_table(t, schedule, marginals.bonds);
  ReverseDistributions out;
  out.n = n;
  out.atoms.reserve(n);
  for (int i = 0; i < n; ++i) out.atoms.push_back(atom_table.mix(noisy.atom(i), pred.atom(i)));
  out.bonds.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      out.bonds[static_cast<std::size_t>(i) * n + j] = bond_table.mix(noisy.bond(i, j), pred.bond(i, j));
    }
  }
  return out;
}

MolGraph denoise_from_prediction(const PredictedDistributions& pred, const MolGraph& noisy, int t,
                                 const NoiseSchedule& schedule, const Marginals& marginals, Rng& rng) {
  const auto dist = reverse_distributions(pred, noisy, t, schedule, marginals);
  const int n = noisy.size();
  const bool readout = t == 1;
  std::vector<int> atoms(n);
  for (int i = 0; i < n; ++i) atoms[i] = readout ? argmax(dist.atoms[i]) : sample_categorical(dist.atoms[i], rng);
  std::vector<std::uint8_t> bonds(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& p = dist.bonds[static_cast<std::size_t>(i) * n + j];
      const auto c = static_cast<std::uint8_t>(readout ? argmax(p) : sample_categorical(p, rng));
      bonds[static_cast<std::size_t>(i) * n + j] = c;
      bonds[static_cast<std::size_t>(j) * n + i] = c;
    }
  }
  return MolGraph::from_dense(std::move(atoms), std::move(bonds), noisy.atom_classes(), noisy.bond_classes());
}

MolGraph denoise_step(const DenoiserParams& params, const MolGraph& noisy, const ConditionContext& context, int t,
                      const NoiseSchedule& schedule, const Marginals& marginals, Rng& rng) {
  if (t < 1 || t > schedule.steps()) {
    throw UsageError("denoise_step: t=" + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps()) +
                     "]");
  }
  const auto pred = predict(params, noisy, context, t);
  return denoise_from_prediction(pred, noisy, t, schedule, marginals, rng);
}

MolGraph generate_one(const Checkpoint& ckpt, const ConditionContext& context, std::uint64_t seed,
                      std::uint64_t index) {
  const NoiseSchedule schedule = cosine_schedule(ckpt.config.model.steps);
  Rng rng(derive_seed(seed, index));
  const int n = sample_node_count(ckpt.histogram, rng);
  MolGraph g = limit_sample(n, ckpt.marginals, rng);
  for (int t = schedule.steps(); t >= 1; --t) g = denoise_step(ckpt.params, g, context, t, schedule, ckpt.marginals, rng);
  return g;
}

std::vector<MolGraph> generate(const Checkpoint& ckpt, const ConditionContext& context, int count,
                               std::uint64_t seed) {
  if (count < 0) throw UsageError("generate: negative count");
  ckpt.marginals.validate();
  ckpt.histogram.validate();
  std::vector<MolGraph> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) out.push_back(generate_one(ckpt, context, seed, static_cast<std::uint64_t>(k)));
  return out;
}

std::string edge_list(const MolGraph& g, const AtomVocab& vocab) {
  std::string out = "atoms=";
  for (int i = 0; i < g.size(); ++i) {
    if (i) out += ',';
    out += vocab.symbol(g.atom(i));
  }
  out += ";bonds=";
  bool first = true;
  for (int i = 0; i < g.size(); ++i) {
    for (int j = i + 1; j < g.size(); ++j) {
      if (!g.adjacent(i, j)) continue;
      if (!first) out += ',';
      first = false;
      out += std::to_string(i) + '-' + std::to_string(j) + ':' + std::to_string(g.bond(i, j));
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) return out;
    start = at + 1;
  }
}

int to_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("edge list: bad integer '" + std::string(s) + "'");
  return v;
}

}  // namespace

MolGraph parse_edge_list(std::string_view text, const AtomVocab& vocab, int bond_classes) {
  const std::size_t semi = text.find(";bonds=");
  if (text.rfind("atoms=", 0) != 0 || semi == std::string_view::npos) {
    throw DataError("edge list: expected atoms=...;bonds=...");
  }
  std::vector<int> atoms;
  for (auto symbol : split(text.substr(6, semi - 6), ',')) {
    const auto index = vocab.index_of(symbol);
    if (!index) throw DataError("edge list: unknown element " + std::string(symbol));
    atoms.push_back(*index);
  }
  std::vector<BondSpec> bonds;
  for (auto item : split(text.substr(semi + 7), ',')) {
    const std::size_t dash = item.find('-');
    const std::size_t colon = item.find(':');
    if (dash == std::string_view::npos || colon == std::string_view::npos || colon < dash) {
      throw DataError("edge list: bad bond '" + std::string(item) + "'");
    }
    bonds.push_back({to_int(item.substr(0, dash)), to_int(item.substr(dash + 1, colon - dash - 1)),
                     to_int(item.substr(colon + 1))});
  }
  for (const auto& b : bonds) {
    if (b.bond_class < 1 || b.bond_class >= bond_classes) throw DataError("edge list: bond class out of range");
  }
  const int n = static_cast<int>(atoms.size());
  return MolGraph::create(n, std::move(atoms), bonds, vocab.size(), bond_classes);
}

std::string format_generated(std::span<const MolGraph> graphs, const AtomVocab& vocab) {
  std::string out;
  for (const auto& g : graphs) {
    if (is_valid(g, vocab)) {
      out += write_smiles(g, vocab);
    } else {
      out += "INVALID\t" + edge_list(g, vocab);
    }
    out += '\n';
  }
  return out;
}

}  // namespace ddtm
