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

#include <gtest/gtest.h>

#include <cmath>

#include "ddtm/denoiser.hpp"
#include "ddtm/error.hpp"
#include "ddtm/smiles.hpp"
#include "test_util.hpp"

using namespace ddtm;
using ddtm::testing::random_graph;
using ddtm::testing::random_permutation;

namespace {

DenoiserConfig small_config(Fusion strategy) {
  DenoiserConfig c;
  c.width = 8;
  c.heads = 2;
  c.fuse_layers = 1;
  c.gt_layers = 1;
  c.atom_classes = 4;
  c.bond_classes = 3;
  c.steps = 10;
  c.protein_dim = 8;
  c.strategy = strategy;
  return c;
}

ConditionContext make_context(Fusion strategy, int dim) {
  const ProteinEmbedding a = kmer_encode({"A", "MKTAYIAK"}, dim, 3);
  const ProteinEmbedding b = kmer_encode({"B", "GSHMLE"}, dim, 3);
  return pair_context(a, b, strategy);
}

DenoiserParams make_params(const DenoiserConfig& c, std::uint64_t seed = 1) {
  Rng rng(seed);
  return init_params(c, rng);
}

double max_abs(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a.data[k] - b.data[k]));
  return worst;
}

}  // namespace

TEST(DenoiserConfig, Validation) {
  DenoiserConfig c = small_config(Fusion::kConcat);
  EXPECT_NO_THROW(c.validate());
  c.heads = 3;
  EXPECT_THROW(c.validate(), UsageError);
  c = small_config(Fusion::kConcat);
  c.gt_layers = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = small_config(Fusion::kNone);
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Params, CountMatchesEnumeration) {
  for (Fusion s : {Fusion::kCrossAttention, Fusion::kConcat, Fusion::kVirtualNode}) {
    for (int d : {8, 16}) {
      for (int layers : {1, 2, 3}) {
        DenoiserConfig c = small_config(s);
        c.width = d;
        c.gt_layers = layers;
        c.fuse_layers = layers;
        c.atom_classes = 9;
        c.bond_classes = 4;
        c.protein_dim = 12;
        std::size_t enumerated = 0;
        for (const auto& [name, shape] : parameter_shapes(c)) {
          enumerated += static_cast<std::size_t>(shape.first) * shape.second;
        }
        EXPECT_EQ(parameter_count(c), enumerated);
        EXPECT_EQ(make_params(c).scalar_count(), enumerated);
      }
    }
  }
}

TEST(Params, StrategySpecificTensors) {
  const auto has = [](Fusion s, const std::string& name) { return make_params(small_config(s)).contains(name); };
  EXPECT_TRUE(has(Fusion::kCrossAttention, "cond.sep"));
  EXPECT_TRUE(has(Fusion::kCrossAttention, "fuse0.cross.k.w"));
  EXPECT_FALSE(has(Fusion::kConcat, "cond.sep"));
  EXPECT_TRUE(has(Fusion::kVirtualNode, "cond.vn.edge"));
  EXPECT_FALSE(has(Fusion::kConcat, "cond.vn.edge"));
  for (Fusion s : {Fusion::kCrossAttention, Fusion::kConcat, Fusion::kVirtualNode}) {
    EXPECT_TRUE(has(s, "cond.null"));
    EXPECT_TRUE(has(s, "gt0.oe.w"));
  }
}

TEST(Params, InitBoundsAndFloatRounding) {
  const DenoiserParams p = make_params(small_config(Fusion::kCrossAttention), 3);
  for (const auto& t : p.tensors()) {
    const double bound = init_bound(t.name, t.value.rows, t.value.cols);
    const bool gain = t.name.ends_with(".g");
    const bool bias = t.name.ends_with(".b");
    for (double v : t.value.data) {
      EXPECT_EQ(static_cast<double>(static_cast<float>(v)), v) << t.name;
      if (gain) {
        EXPECT_EQ(v, 1.0) << t.name;
      } else if (bias) {
        EXPECT_EQ(v, 0.0) << t.name;
      } else {
        EXPECT_LE(std::abs(v), bound) << t.name;
      }
    }
  }
  EXPECT_DOUBLE_EQ(init_bound("gt0.q.w", 16, 8), 0.25);
  EXPECT_EQ(init_bound("gt0.node.ln.g", 1, 8), 1.0);
  EXPECT_EQ(init_bound("head_x.1.b", 1, 8), 0.0);
}

TEST(Params, InitIsDeterministic) {
  const auto c = small_config(Fusion::kVirtualNode);
  const DenoiserParams a = make_params(c, 5);
  const DenoiserParams b = make_params(c, 5);
  const DenoiserParams other = make_params(c, 6);
  ASSERT_EQ(a.tensors().size(), b.tensors().size());
  bool differs = false;
  for (std::size_t k = 0; k < a.tensors().size(); ++k) {
    EXPECT_EQ(a.tensors()[k].value, b.tensors()[k].value);
    differs |= a.tensors()[k].value != other.tensors()[k].value;
  }
  EXPECT_TRUE(differs);
}

TEST(Features, TimestepAndNode) {
  const Tensor t = timestep_features(5, 10, 8);
  EXPECT_NEAR(t.data[0], std::sin(500.0), 1e-12);
  EXPECT_NEAR(t.data[1], std::cos(500.0), 1e-12);
  EXPECT_NEAR(t.data[2], std::sin(500.0 * std::pow(10000.0, -0.25)), 1e-12);
  const MolGraph g = parse_smiles("C1CC1O");
  const Tensor f = node_features(g);
  EXPECT_EQ(f.cols, 9 + 4 + kWalkLengths);
  EXPECT_EQ(f(3, 2), 1.0);
  EXPECT_EQ(f(0, 9), 0.5);  // two single bonds
  EXPECT_DOUBLE_EQ(f(0, 12), 0.4);
  // A triangle atom has 2 closed 3-walks; the hydroxyl oxygen has none.
  EXPECT_DOUBLE_EQ(f(1, 13), std::log1p(2.0) / 4.0);
  EXPECT_EQ(f(3, 13), 0.0);
}

TEST(Predict, DistributionsAreNormalizedAndSymmetric) {
  for (Fusion s : {Fusion::kCrossAttention, Fusion::kConcat, Fusion::kVirtualNode}) {
    const auto c = small_config(s);
    const DenoiserParams p = make_params(c);
    Rng rng(7);
    const MolGraph g = random_graph(5, 4, 3, 0.4, rng);
    const auto pred = predict(p, g, make_context(s, 8), 4);
    for (int i = 0; i < 5; ++i) {
      double row = 0.0;
      for (double v : pred.atom(i)) row += v;
      EXPECT_NEAR(row, 1.0, 1e-12);
      for (int j = 0; j < 5; ++j) {
        double total = 0.0;
        for (int k = 0; k < 3; ++k) {
          total += pred.bond(i, j)[k];
          EXPECT_NEAR(pred.bond(i, j)[k], pred.bond(j, i)[k], 1e-12);
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
      EXPECT_EQ(pred.bond(i, i)[0], 1.0);
    }
  }
}

TEST(Predict, NullContextWorksForEveryStrategy) {
  for (Fusion s : {Fusion::kCrossAttention, Fusion::kConcat, Fusion::kVirtualNode}) {
    const DenoiserParams p = make_params(small_config(s));
    Rng rng(9);
    EXPECT_NO_THROW(predict(p, random_graph(3, 4, 3, 0.5, rng), ConditionContext::null_context(), 1));
  }
}

TEST(Predict, RejectsBadInputs) {
  const auto c = small_config(Fusion::kConcat);
  const DenoiserParams p = make_params(c);
  Rng rng(1);
  const MolGraph g = random_graph(3, 4, 3, 0.5, rng);
  const auto ctx = make_context(Fusion::kConcat, 8);
  EXPECT_THROW(predict(p, g, ctx, 0), UsageError);
  EXPECT_THROW(predict(p, g, ctx, 11), UsageError);
  EXPECT_THROW(predict(p, g, make_context(Fusion::kCrossAttention, 8), 1), UsageError);
  EXPECT_THROW(predict(p, g, make_context(Fusion::kConcat, 16), 1), UsageError);
  EXPECT_THROW(predict(p, parse_smiles("CC"), ctx, 1), UsageError);
}

TEST(Predict, Deterministic) {
  const auto c = small_config(Fusion::kCrossAttention);
  const DenoiserParams p = make_params(c);
  Rng rng(2);
  const MolGraph g = random_graph(6, 4, 3, 0.3, rng);
  const auto ctx = make_context(Fusion::kCrossAttention, 8);
  const auto a = predict(p, g, ctx, 3);
  const auto b = predict(p, g, ctx, 3);
  EXPECT_EQ(a.atoms, b.atoms);
  EXPECT_EQ(a.bonds, b.bonds);
}

TEST(Predict, PermutationEquivariance) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Fusion s = std::array{Fusion::kCrossAttention, Fusion::kConcat, Fusion::kVirtualNode}[trial % 3];
    const DenoiserParams p = make_params(small_config(s), trial);
    const int n = 1 + static_cast<int>(uniform_int(rng, 0, 7));
    const MolGraph g = random_graph(n, 4, 3, 0.4, rng);
    const auto perm = random_permutation(n, rng);
    const auto ctx = make_context(s, 8);
    const int t = 1 + static_cast<int>(uniform_int(rng, 0, 9));
    const auto a = predict(p, g, ctx, t);
    const auto b = predict(p, permute(g, perm), ctx, t);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 4; ++k) EXPECT_NEAR(a.atom(i)[k], b.atom(perm[i])[k], 1e-9);
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.bond(i, j)[k], b.bond(perm[i], perm[j])[k], 1e-9);
    }
  }
}

TEST(Attention, SingleTokenReturnsProjectedValue) {
  const auto c = small_config(Fusion::kCrossAttention);
  const DenoiserParams p = make_params(c);
  Tape tape(false);
  DenoiserGraph graph(p, tape);
  Rng rng(4);
  Tensor x(3, 8), m(1, 8);
  for (double& v : x.data) v = uniform01(rng);
  for (double& v : m.data) v = uniform01(rng);
  const Tensor out = tape.value(graph.multi_head_attention("fuse0.self", tape.constant(x), tape.constant(m)));
  // Expected: (m Wv) Wo + bo for every query row.
  const Tensor& wv = p.get("fuse0.self.v.w");
  const Tensor& wo = p.get("fuse0.self.o.w");
  const Tensor& bo = p.get("fuse0.self.o.b");
  std::vector<double> v(8, 0.0), expected(8, 0.0);
  for (int j = 0; j < 8; ++j)
    for (int k = 0; k < 8; ++k) v[j] += m.data[k] * wv(k, j);
  for (int j = 0; j < 8; ++j) {
    expected[j] = bo.data[j];
    for (int k = 0; k < 8; ++k) expected[j] += v[k] * wo(k, j);
  }
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 8; ++j) EXPECT_NEAR(out(r, j), expected[j], 1e-12);
}

TEST(Attention, CopiesOfOneTokenActAsThatToken) {
  const DenoiserParams p = make_params(small_config(Fusion::kCrossAttention));
  Rng rng(5);
  Tensor x(4, 8), m(2, 8), dup(3, 8);
  for (double& v : x.data) v = uniform01(rng);
  for (double& v : m.data) v = uniform01(rng);
  // dup = [m0, m0, m1] weights m0 twice; compare against a direct softmax oracle.
  for (int j = 0; j < 8; ++j) {
    dup(0, j) = m(0, j);
    dup(1, j) = m(0, j);
    dup(2, j) = m(1, j);
  }
  Tape tape(false);
  DenoiserGraph graph(p, tape);
  const Tensor once = tape.value(graph.multi_head_attention("fuse0.self", tape.constant(x), tape.constant(m)));
  const Tensor twice = tape.value(graph.multi_head_attention("fuse0.self", tape.constant(x), tape.constant(dup)));
  // Doubling a key's multiplicity shifts weight toward it, so outputs differ...
  EXPECT_GT(max_abs(once, twice), 1e-9);
  // ...while a context made entirely of copies of one token equals the single token.
  Tensor single(1, 8), copies(3, 8);
  for (int j = 0; j < 8; ++j) single(0, j) = copies(0, j) = copies(1, j) = copies(2, j) = m(1, j);
  const Tensor a = tape.value(graph.multi_head_attention("fuse0.self", tape.constant(x), tape.constant(single)));
  const Tensor b = tape.value(graph.multi_head_attention("fuse0.self", tape.constant(x), tape.constant(copies)));
  EXPECT_LT(max_abs(a, b), 1e-12);
}

TEST(GraphTransformer, RejectsAsymmetricEdges) {
  const DenoiserParams p = make_params(small_config(Fusion::kConcat));
  Tape tape(false);
  DenoiserGraph graph(p, tape);
  Tensor h(2, 8, 0.1), e(4, 8, 0.0);
  e(1, 0) = 1.0;  // (0, 1) set, (1, 0) not
  EXPECT_THROW(graph.graph_transformer_layer(0, tape.constant(h), tape.constant(e), 2), UsageError);
}

TEST(Backward, LossMatchesPredictionCrossEntropy) {
  const auto c = small_config(Fusion::kConcat);
  const DenoiserParams p = make_params(c);
  Rng rng(6);
  const MolGraph clean = random_graph(4, 4, 3, 0.5, rng);
  const MolGraph noisy = random_graph(4, 4, 3, 0.5, rng);
  const auto ctx = make_context(Fusion::kConcat, 8);
  const auto pred = predict(p, noisy, ctx, 5);
  const double lambda = 3.0;
  double expected = 0.0;
  for (int i = 0; i < 4; ++i) {
    expected -= std::log(pred.atom(i)[clean.atom(i)]);
    for (int j = i + 1; j < 4; ++j) expected -= 2.0 * lambda * std::log(pred.bond(i, j)[clean.bond(i, j)]);
  }
  EXPECT_NEAR(backward(p, noisy, ctx, 5, clean, lambda).loss, expected, 1e-10);
}

TEST(Backward, ZeroLambdaLeavesEdgeHeadUntouched) {
  const auto c = small_config(Fusion::kVirtualNode);
  const DenoiserParams p = make_params(c);
  Rng rng(7);
  const MolGraph clean = random_graph(5, 4, 3, 0.5, rng);
  const MolGraph noisy = random_graph(5, 4, 3, 0.5, rng);
  const auto r = backward(p, noisy, make_context(Fusion::kVirtualNode, 8), 2, clean, 0.0);
  bool node_head_moves = false;
  for (std::size_t k = 0; k < p.tensors().size(); ++k) {
    const auto& name = p.tensors()[k].name;
    double norm = 0.0;
    for (double v : r.gradients[k].data) norm += std::abs(v);
    if (name.starts_with("head_e.")) EXPECT_EQ(norm, 0.0) << name;
    if (name.starts_with("head_x.")) node_head_moves |= norm > 0.0;
  }
  EXPECT_TRUE(node_head_moves);
}

TEST(Backward, UnusedTensorsGetZeroGradients) {
  const auto c = small_config(Fusion::kCrossAttention);
  const DenoiserParams p = make_params(c);
  Rng rng(8);
  const MolGraph g = random_graph(4, 4, 3, 0.5, rng);
  const auto r = backward(p, g, make_context(Fusion::kCrossAttention, 8), 2, g, 1.0);
  ASSERT_EQ(r.gradients.size(), p.tensors().size());
  for (const char* name : {"cond.null", "cond.cat.w", "cond.cat.b"}) {
    for (double v : r.gradients[p.index_of(name)].data) EXPECT_EQ(v, 0.0) << name;
  }
  double sep = 0.0;
  for (double v : r.gradients[p.index_of("cond.sep")].data) sep += std::abs(v);
  EXPECT_GT(sep, 0.0);
}
