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

#include <span>
#include <vector>

#include "ddtm/molgraph.hpp"
#include "ddtm/rng.hpp"

namespace ddtm {

/// Dense k x k matrix, row-major.
struct SquareMatrix {
  int k = 0;
  std::vector<double> a;

  SquareMatrix() = default;
  explicit SquareMatrix(int size) : k(size), a(static_cast<std::size_t>(size) * size, 0.0) {}

  static SquareMatrix identity(int size);

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * k + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * k + j]; }
  std::span<const double> row(int i) const { return {a.data() + static_cast<std::size_t>(i) * k, static_cast<std::size_t>(k)}; }

  SquareMatrix operator*(const SquareMatrix& rhs) const;
};

/// beta[t] for t = 1..T and alpha_bar[t] = prod_{s<=t} (1 - beta[s]), alpha_bar[0] = 1.
/// Index 0 of `beta` is unused and zero.
class NoiseSchedule {
 public:
  /// Arbitrary betas in [0, 1]; `betas[0]` is the value for step 1.
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(beta_.size()) - 1; }
  double beta(int t) const { return beta_.at(t); }
  double alpha_bar(int t) const { return alpha_bar_.at(t); }

  /// Strictly decreasing alpha_bar, alpha_bar[T] < 0.01 and every beta in (0, 1].
  bool well_formed() const;

 private:
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

/// Cosine schedule: alpha_bar(t) = cos^2(((t/T + s)/(1 + s)) pi/2) / cos^2((s/(1 + s)) pi/2),
/// with each beta clamped into (0, 0.999]. Throws UsageError for T = 0 or s <= 0.
NoiseSchedule cosine_schedule(int steps, double offset = 0.008);

/// Class-frequency limit distributions for atoms and bonds.
struct Marginals {
  std::vector<double> atoms;
  std::vector<double> bonds;

  /// Throws UsageError unless both vectors are nonnegative and sum to 1 within 1e-12.
  void validate() const;
  static Marginals uniform(int atom_classes, int bond_classes);
};

/// Atom frequencies over all nodes and bond frequencies over all unordered
/// pairs i < j. Classes never observed get probability zero unless
/// `uniform_fallback` is set, in which case uniform marginals are returned.
Marginals estimate_marginals(std::span<const MolGraph> graphs, int atom_classes, int bond_classes,
                             bool uniform_fallback = false);

struct TransitionPair {
  SquareMatrix atoms;
  SquareMatrix bonds;
};

/// (1 - beta) I + beta 1 m'.
SquareMatrix marginal_transition(double beta, std::span<const double> marginal);

/// Q^t for 1 <= t <= T.
TransitionPair step_transition(const NoiseSchedule& schedule, int t, const Marginals& m);

/// Qbar^t = alpha_bar[t] I + (1 - alpha_bar[t]) 1 m' for 0 <= t <= T (t = 0 is I).
TransitionPair cumulative_transition(const NoiseSchedule& schedule, int t, const Marginals& m);

/// Draws G^t ~ q(G^t | G^0): nodes from rows of Qbar_X^t, upper-triangle edges
/// from rows of Qbar_E^t, mirrored.
MolGraph forward_sample(const MolGraph& clean, int t, const NoiseSchedule& schedule,
                        const Marginals& m, Rng& rng);

/// Exact posterior q(x^{t-1} | x^t, x^0) over one categorical space, proportional
/// to column x^t of Q^t times row x^0 of Qbar^{t-1}. Valid for 1 <= t <= T.
/// Throws NumericError when the normalizer is zero.
std::vector<double> posterior(int xt, int x0, int t, const NoiseSchedule& schedule,
                              std::span<const double> marginal);

/// Unnormalized posterior terms; all zero when x^0 cannot reach x^t.
std::vector<double> posterior_unnormalized(int xt, int x0, int t, const NoiseSchedule& schedule,
                                           std::span<const double> marginal);

/// Draws n nodes i.i.d. from m.atoms and upper-triangle edges i.i.d. from m.bonds.
MolGraph limit_sample(int n, const Marginals& m, Rng& rng);

}  // namespace ddtm
