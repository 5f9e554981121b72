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

#include "ddtm/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ddtm/error.hpp"

namespace ddtm {

SquareMatrix SquareMatrix::identity(int size) {
  SquareMatrix m(size);
  for (int i = 0; i < size; ++i) m(i, i) = 1.0;
  return m;
}

SquareMatrix SquareMatrix::operator*(const SquareMatrix& rhs) const {
  if (k != rhs.k) throw UsageError("matrix product: size mismatch");
  SquareMatrix out(k);
  for (int i = 0; i < k; ++i) {
    for (int l = 0; l < k; ++l) {
      const double a_il = (*this)(i, l);
      for (int j = 0; j < k; ++j) out(i, j) += a_il * rhs(l, j);
    }
  }
  return out;
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw UsageError("noise schedule needs at least one step");
  NoiseSchedule s;
  s.beta_.assign(1, 0.0);
  s.alpha_bar_.assign(1, 1.0);
  for (double b : betas) {
    if (!(b >= 0.0 && b <= 1.0)) throw UsageError("noise schedule: beta outside [0, 1]");
    s.beta_.push_back(b);
    s.alpha_bar_.push_back(s.alpha_bar_.back() * (1.0 - b));
  }
  return s;
}

bool NoiseSchedule::well_formed() const {
  for (int t = 1; t <= steps(); ++t) {
    if (!(beta_[t] > 0.0 && beta_[t] <= 1.0)) return false;
    if (!(alpha_bar_[t] < alpha_bar_[t - 1])) return false;
  }
  return alpha_bar_.back() < 0.01;
}

NoiseSchedule cosine_schedule(int steps, double offset) {
  if (steps < 1) throw UsageError("cosine schedule: T must be at least 1");
  if (!(offset > 0.0)) throw UsageError("cosine schedule: offset must be positive");
  auto f = [&](double t) {
    const double c = std::cos((t / steps + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0.0);
  std::vector<double> betas;
  betas.reserve(steps);
  for (int t = 1; t <= steps; ++t) {
    double beta = 1.0 - (f(t) / f0) / (f(t - 1) / f0);
    beta = std::clamp(beta, 1e-12, 0.999);
    betas.push_back(beta);
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

namespace {

void validate_distribution(const std::vector<double>& p, const char* what) {
  if (p.empty()) throw UsageError(std::string(what) + " marginal is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw UsageError(std::string(what) + " marginal has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw UsageError(std::string(what) + " marginal does not sum to 1");
}

std::vector<double> normalized_counts(const std::vector<double>& counts, bool uniform_fallback) {
  double total = 0.0;
  bool any_zero = false;
  for (double c : counts) {
    total += c;
    any_zero |= c == 0.0;
  }
  std::vector<double> p(counts.size(), 1.0 / static_cast<double>(counts.size()));
  if (total == 0.0 || (uniform_fallback && any_zero)) return p;
  for (std::size_t k = 0; k < counts.size(); ++k) p[k] = counts[k] / total;
  return p;
}

}  // namespace

void Marginals::validate() const {
  validate_distribution(atoms, "atom");
  validate_distribution(bonds, "bond");
}

Marginals Marginals::uniform(int atom_classes, int bond_classes) {
  return {std::vector<double>(atom_classes, 1.0 / atom_classes),
          std::vector<double>(bond_classes, 1.0 / bond_classes)};
}

Marginals estimate_marginals(std::span<const MolGraph> graphs, int atom_classes, int bond_classes,
                             bool uniform_fallback) {
  std::vector<double> atom_counts(atom_classes, 0.0);
  std::vector<double> bond_counts(bond_classes, 0.0);
  for (const MolGraph& g : graphs) {
    for (int i = 0; i < g.size(); ++i) {
      atom_counts.at(g.atom(i)) += 1.0;
      for (int j = i + 1; j < g.size(); ++j) bond_counts.at(g.bond(i, j)) += 1.0;
    }
  }
  return {normalized_counts(atom_counts, uniform_fallback), normalized_counts(bond_counts, uniform_fallback)};
}

SquareMatrix marginal_transition(double beta, std::span<const double> marginal) {
  const int k = static_cast<int>(marginal.size());
  SquareMatrix q(k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) q(i, j) = beta * marginal[j] + (i == j ? 1.0 - beta : 0.0);
  }
  return q;
}

TransitionPair step_transition(const NoiseSchedule& schedule, int t, const Marginals& m) {
  if (t < 1 || t > schedule.steps()) {
    throw UsageError("step_transition: t=" + std::to_string(t) + " outside [1, " +
                     std::to_string(schedule.steps()) + "]");
  }
  return {marginal_transition(schedule.beta(t), m.atoms), marginal_transition(schedule.beta(t), m.bonds)};
}

TransitionPair cumulative_transition(const NoiseSchedule& schedule, int t, const Marginals& m) {
  if (t < 0 || t > schedule.steps()) {
    throw UsageError("cumulative_transition: t=" + std::to_string(t) + " outside [0, " +
                     std::to_string(schedule.steps()) + "]");
  }
  const double keep = schedule.alpha_bar(t);
  return {marginal_transition(1.0 - keep, m.atoms), marginal_transition(1.0 - keep, m.bonds)};
}

MolGraph forward_sample(const MolGraph& clean, int t, const NoiseSchedule& schedule,
                        const Marginals& m, Rng& rng) {
  const TransitionPair q = cumulative_transition(schedule, t, m);
  const int n = clean.size();
  if (q.atoms.k != clean.atom_classes() || q.bonds.k != clean.bond_classes()) {
    throw UsageError("forward_sample: marginal sizes do not match graph class counts");
  }
  std::vector<int> atoms(n);
  for (int i = 0; i < n; ++i) atoms[i] = sample_categorical(q.atoms.row(clean.atom(i)), rng);
  std::vector<std::uint8_t> bonds(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto c = static_cast<std::uint8_t>(sample_categorical(q.bonds.row(clean.bond(i, j)), rng));
      bonds[static_cast<std::size_t>(i) * n + j] = c;
      bonds[static_cast<std::size_t>(j) * n + i] = c;
    }
  }
  return MolGraph::from_dense(std::move(atoms), std::move(bonds), clean.atom_classes(), clean.bond_classes());
}

std::vector<double> posterior_unnormalized(int xt, int x0, int t, const NoiseSchedule& schedule,
                                           std::span<const double> marginal) {
  if (t < 1 || t > schedule.steps()) {
    throw UsageError("posterior: t=" + std::to_string(t) + " outside [1, " +
                     std::to_string(schedule.steps()) + "]");
  }
  const int k = static_cast<int>(marginal.size());
  if (xt < 0 || xt >= k || x0 < 0 || x0 >= k) throw UsageError("posterior: class index out of range");
  const double beta = schedule.beta(t);
  const double keep = schedule.alpha_bar(t - 1);
  std::vector<double> out(k);
  for (int y = 0; y < k; ++y) {
    // Q^t[y, xt] * Qbar^{t-1}[x0, y]
    const double forward = beta * marginal[xt] + (y == xt ? 1.0 - beta : 0.0);
    const double prior = (1.0 - keep) * marginal[y] + (y == x0 ? keep : 0.0);
    out[y] = forward * prior;
  }
  return out;
}

std::vector<double> posterior(int xt, int x0, int t, const NoiseSchedule& schedule,
                              std::span<const double> marginal) {
  std::vector<double> p = posterior_unnormalized(xt, x0, t, schedule, marginal);
  double z = 0.0;
  for (double v : p) z += v;
  if (!(z > 0.0)) {
    throw NumericError("posterior: zero normalizer for x_t=" + std::to_string(xt) +
                       ", x_0=" + std::to_string(x0) + " at t=" + std::to_string(t));
  }
  for (double& v : p) v /= z;
  return p;
}

MolGraph limit_sample(int n, const Marginals& m, Rng& rng) {
  if (n < 1) throw UsageError("limit_sample: n must be at least 1");
  const int f = static_cast<int>(m.atoms.size());
  const int b = static_cast<int>(m.bonds.size());
  std::vector<int> atoms(n);
  for (int i = 0; i < n; ++i) atoms[i] = sample_categorical(m.atoms, rng);
  std::vector<std::uint8_t> bonds(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto c = static_cast<std::uint8_t>(sample_categorical(m.bonds, rng));
      bonds[static_cast<std::size_t>(i) * n + j] = c;
      bonds[static_cast<std::size_t>(j) * n + i] = c;
    }
  }
  return MolGraph::from_dense(std::move(atoms), std::move(bonds), f, b);
}

}  // namespace ddtm
