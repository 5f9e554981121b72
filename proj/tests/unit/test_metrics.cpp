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

#include "ddtm/error.hpp"
#include "ddtm/metrics.hpp"
#include "ddtm/smiles.hpp"

using namespace ddtm;

namespace {

// Ten generated entries against a training set {CCO, benzene}:
//   CCO, OCC (duplicate), benzene, CCN, CCN, CC=O, pentavalent carbon (invalid),
//   unparsable line, methane, NCC (duplicate of CCN).
std::vector<MetricsInput> hand_set() {
  const BondSpec five[] = {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {0, 4, 1}, {0, 5, 1}};
  std::vector<MetricsInput> v;
  for (const char* s : {"CCO", "OCC", "c1ccccc1", "CCN", "CCN", "CC=O"}) v.push_back({true, parse_smiles(s)});
  v.push_back({true, MolGraph::create(6, {0, 0, 0, 0, 0, 0}, five, 9)});
  v.push_back({false, MolGraph{}});
  v.push_back({true, parse_smiles("C")});
  v.push_back({true, parse_smiles("NCC")});
  return v;
}

std::set<std::string> train_keys() {
  return {canonical_form(parse_smiles("CCO")), canonical_form(parse_smiles("c1ccccc1"))};
}

}  // namespace

TEST(Metrics, HandComputedSet) {
  const MetricsReport r = report(hand_set(), train_keys(), AtomVocab::standard());
  EXPECT_EQ(r.total, 10u);
  EXPECT_EQ(r.valid, 8u);
  EXPECT_EQ(r.unique, 5u);
  EXPECT_EQ(r.novel, 5u);
  EXPECT_EQ(r.validity, 0.8);
  EXPECT_EQ(r.uniqueness, 0.625);
  EXPECT_EQ(r.novelty, 0.625);
  // Fingerprint bit counts: CCO, CCN and CC=O carry 8 bits, benzene and methane 3.
  // Shared bits: every pair shares the carbon atom bit; CCO/CCN/CC=O also share the
  // methyl environment, CCO/CC=O the oxygen bit. Summing similarities over the 28
  // valid pairs gives 3252/455.
  EXPECT_TRUE(r.diversity_defined);
  EXPECT_NEAR(r.diversity, 2372.0 / 3185.0, 1e-12);
  ASSERT_EQ(r.molecules.size(), 10u);
  EXPECT_TRUE(r.molecules[0].first_occurrence);
  EXPECT_FALSE(r.molecules[1].first_occurrence);
  EXPECT_FALSE(r.molecules[0].novel);
  EXPECT_TRUE(r.molecules[3].novel);
  EXPECT_FALSE(r.molecules[6].valid);
  EXPECT_TRUE(r.molecules[6].key.empty());
  EXPECT_FALSE(r.molecules[7].valid);
  EXPECT_FALSE(r.molecules[9].first_occurrence);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Metrics, PairwiseSimilaritiesBehindTheHandSet) {
  const auto fp = [](const char* s) { return fingerprint(parse_smiles(s)); };
  EXPECT_EQ(fp("CCO").bits.size(), 8u);
  EXPECT_EQ(fp("c1ccccc1").bits.size(), 3u);
  EXPECT_EQ(fp("C").bits.size(), 3u);
  EXPECT_DOUBLE_EQ(tanimoto(fp("CCO"), fp("CCN")), 2.0 / 14.0);
  EXPECT_DOUBLE_EQ(tanimoto(fp("CCO"), fp("CC=O")), 3.0 / 13.0);
  EXPECT_DOUBLE_EQ(tanimoto(fp("CCN"), fp("CC=O")), 2.0 / 14.0);
  EXPECT_DOUBLE_EQ(tanimoto(fp("CCO"), fp("C")), 1.0 / 10.0);
  EXPECT_DOUBLE_EQ(tanimoto(fp("c1ccccc1"), fp("C")), 1.0 / 5.0);
}

TEST(Metrics, FractionHelpers) {
  std::vector<MolGraph> graphs;
  for (const auto& in : hand_set()) {
    if (in.parsed) graphs.push_back(in.graph);
  }
  EXPECT_EQ(validity_rate(graphs, AtomVocab::standard()).value, 8.0 / 9.0);
  EXPECT_EQ(uniqueness(graphs, AtomVocab::standard()).value, 0.625);
  EXPECT_EQ(novelty(graphs, train_keys(), AtomVocab::standard()).value, 0.625);
  EXPECT_NEAR(diversity(graphs, AtomVocab::standard()), 2372.0 / 3185.0, 1e-12);
  const std::vector<MolGraph> none;
  EXPECT_TRUE(validity_rate(none, AtomVocab::standard()).warning);
  EXPECT_EQ(validity_rate(none, AtomVocab::standard()).value, 0.0);
  EXPECT_TRUE(uniqueness(none, AtomVocab::standard()).warning);
  EXPECT_THROW(diversity(none, AtomVocab::standard()), UsageError);
}

TEST(Metrics, DegenerateInputsWarn) {
  const MetricsReport empty = report(std::span<const MetricsInput>{}, {}, AtomVocab::standard());
  EXPECT_EQ(empty.validity, 0.0);
  EXPECT_FALSE(empty.diversity_defined);
  EXPECT_EQ(empty.warnings.size(), 2u);
  const std::vector<MolGraph> one = {parse_smiles("CC")};
  const MetricsReport single = report(one, {}, AtomVocab::standard());
  EXPECT_EQ(single.validity, 1.0);
  EXPECT_FALSE(single.diversity_defined);
  EXPECT_EQ(single.warnings.size(), 1u);
}

TEST(Metrics, JsonRoundTrip) {
  const MetricsReport r = report(hand_set(), train_keys(), AtomVocab::standard());
  const MetricsReport back = MetricsReport::from_json(r.to_json());
  EXPECT_EQ(back, r);
  const std::vector<MolGraph> one = {parse_smiles("CC")};
  const MetricsReport single = report(one, {}, AtomVocab::standard());
  EXPECT_NE(single.to_json().find("\"diversity\": null"), std::string::npos);
  EXPECT_EQ(MetricsReport::from_json(single.to_json()), single);
  EXPECT_THROW(MetricsReport::from_json("{}"), DataError);
  EXPECT_THROW(MetricsReport::from_json("not json"), DataError);
}
