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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ddtm/error.hpp"
#include "ddtm/ingest.hpp"
#include "ddtm/rng.hpp"
#include "ddtm/smiles.hpp"

using namespace ddtm;

namespace {

const std::filesystem::path kData = DDTM_TEST_DATA;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("ddtm_ingest_" + name);
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

DatasetRecord rec(std::string smiles, std::string protein, double nm) {
  return {std::move(smiles), std::move(protein), Measure::kIC50, nm, 0};
}

LabeledRecord active(const std::string& smiles, const std::string& protein) {
  const MolGraph g = parse_smiles(smiles);
  return {canonical_form(g), protein, Activity::kActive, g};
}

std::vector<ProteinSequence> proteins(int k) {
  std::vector<ProteinSequence> out;
  for (int i = 0; i < k; ++i) out.push_back({"Q" + std::to_string(i), "MKT"});
  return out;
}

}  // namespace

TEST(LoadRecords, CountsAndSkips) {
  const auto ok = write_temp("ok.tsv", "extra\tvalue_nM\tmeasure\tprotein_id\tsmiles\nx\t5\tKi\tP1\tCCO\n"
                                       "y\t20000\tIC50\tP2\tCC\nz\t1e3\tEC50\tP3\tCCN\n");
  std::size_t skipped = 99;
  const auto records = load_records(ok, &skipped);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(skipped, 0u);
  EXPECT_EQ(records[0].smiles, "CCO");
  EXPECT_EQ(records[0].measure, Measure::kKi);
  EXPECT_EQ(records[2].value_nm, 1000.0);
  EXPECT_EQ(records[2].line, 4u);

  const auto bad = write_temp("bad.tsv", "smiles\tprotein_id\tmeasure\tvalue_nM\nCCO\tP1\tIC50\tabc\n"
                                         "CCO\tP1\tIC50\t-3\nCCO\tP1\tIC50\tinf\nCCO\tP1\tIC50\n"
                                         "CCO\tP1\tpKi\t4\n\tP1\tIC50\t4\nCCO\tP1\tKd\t4\n");
  const auto kept = load_records(bad, &skipped);
  EXPECT_EQ(kept.size(), 1u);
  EXPECT_EQ(skipped, 6u);

  EXPECT_THROW(load_records(write_temp("nohdr.tsv", "smiles\tprotein_id\tvalue_nM\n")), DataError);
  EXPECT_THROW(load_records(write_temp("empty.tsv", "")), DataError);
  EXPECT_THROW(load_records(kData / "does_not_exist.tsv"), DataError);
  EXPECT_THROW(parse_measure("pIC50"), DataError);
}

TEST(LoadDataset, ReadsFasta) {
  const auto data = load_dataset(kData / "ingest_rows.tsv", kData / "ingest_proteins.fa");
  EXPECT_EQ(data.records.size(), 18u);
  EXPECT_EQ(data.skipped_rows, 2u);
  ASSERT_EQ(data.sequences.size(), 4u);
  EXPECT_EQ(data.sequences[0].id, "P1");
  EXPECT_EQ(data.sequences[3].residues, "MALWMRLLPLLALLALWGPDPA");
}

TEST(Label, Thresholds) {
  EXPECT_EQ(label_bioactivity(rec("C", "P", 50)), Activity::kActive);
  EXPECT_EQ(label_bioactivity(rec("C", "P", 99.999)), Activity::kActive);
  EXPECT_EQ(label_bioactivity(rec("C", "P", 100)), Activity::kAmbiguous);
  EXPECT_EQ(label_bioactivity(rec("C", "P", 5000)), Activity::kAmbiguous);
  EXPECT_EQ(label_bioactivity(rec("C", "P", 10000)), Activity::kAmbiguous);
  EXPECT_EQ(label_bioactivity(rec("C", "P", 10000.001)), Activity::kInactive);
  EXPECT_EQ(label_bioactivity(rec("C", "P", 20000)), Activity::kInactive);
  for (Measure m : {Measure::kIC50, Measure::kKd, Measure::kKi, Measure::kEC50}) {
    DatasetRecord r = rec("C", "P", 1);
    r.measure = m;
    EXPECT_EQ(label_bioactivity(r), Activity::kActive);
    EXPECT_EQ(parse_measure(measure_name(m)), m);
  }
}

TEST(Label, DropsUnusableMolecules) {
  IngestStats stats;
  IngestOptions options;
  options.size_cap = 4;
  const std::vector<DatasetRecord> records = {rec("CCO", "P", 1), rec("C[NH3+]", "P", 1), rec("C(C)(C)(C)(C)C", "P", 1),
                                              rec("CCCCC", "P", 1), rec("CC", "P", 500)};
  const auto out = label_records(records, AtomVocab::standard(), options, stats);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].key, canonical_form(parse_smiles("OCC")));
  EXPECT_EQ(out[1].label, Activity::kAmbiguous);
  EXPECT_EQ(stats.parse_failures, 1u);
  EXPECT_EQ(stats.invalid, 1u);
  EXPECT_EQ(stats.oversize, 1u);
  EXPECT_EQ(stats.ambiguous, 1u);
}

TEST(Conflicts, RemovedEntirelyAndDeduplicated) {
  EXPECT_TRUE(resolve_conflicts({}).empty());
  LabeledRecord inactive = active("CCN", "P1");
  inactive.label = Activity::kInactive;
  const std::vector<LabeledRecord> in = {active("CCO", "P1"), active("OCC", "P1"), active("CCN", "P1"), inactive,
                                         active("CCN", "P2")};
  IngestStats stats;
  const auto out = resolve_conflicts(in, &stats);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].key, canonical_form(parse_smiles("CCO")));
  EXPECT_EQ(out[1].protein_id, "P2");
  EXPECT_EQ(stats.conflicted, 2u);
}

TEST(Pairing, ExamplesAndCounts) {
  const auto seqs = proteins(3);
  EXPECT_EQ(pair_dual_targets({active("CCO", "Q0"), active("CCO", "Q1")}, seqs, {}).size(), 1u);
  EXPECT_EQ(pair_dual_targets({active("CCO", "Q0"), active("CCO", "Q1"), active("CCO", "Q2")}, seqs, {}).size(), 3u);
  IngestStats stats;
  EXPECT_TRUE(pair_dual_targets({active("CCO", "Q0"), active("CCO", "Z")}, seqs, {}, &stats).empty());
  EXPECT_EQ(stats.unknown_protein, 1u);
  EXPECT_EQ(stats.single_target, 1u);
}

// k proteins give k(k-1)/2 triples, each pair once, ids ordered within a triple.
TEST(Pairing, PairCountProperty) {
  Rng rng(17);
  const char* molecules[] = {"CCO", "CCN", "c1ccccc1", "CC(=O)O", "CCCl", "C#N"};
  for (int trial = 0; trial < 50; ++trial) {
    const auto seqs = proteins(8);
    std::vector<LabeledRecord> records;
    std::vector<int> k_of(6, 0);
    for (int m = 0; m < 6; ++m) {
      const int k = static_cast<int>(uniform_int(rng, 0, 8));
      k_of[m] = k;
      for (int p = 0; p < k; ++p) records.push_back(active(molecules[m], "Q" + std::to_string(p)));
    }
    for (std::size_t i = records.size(); i > 1; --i) std::swap(records[i - 1], records[uniform_int(rng, 0, i - 1)]);
    IngestOptions options;
    options.pair_cap = 1000;
    const auto triples = pair_dual_targets(records, seqs, options);
    std::size_t expected = 0;
    for (int k : k_of) expected += static_cast<std::size_t>(k * (k - 1) / 2);
    ASSERT_EQ(triples.size(), expected);
    for (int m = 0; m < 6; ++m) {
      const std::string key = canonical_form(parse_smiles(molecules[m]));
      std::set<std::pair<std::string, std::string>> pairs;
      for (const auto& t : triples) {
        if (canonical_form(t.graph) != key) continue;
        EXPECT_LT(t.protein_a, t.protein_b);
        pairs.insert({t.protein_a, t.protein_b});
      }
      EXPECT_EQ(pairs.size(), static_cast<std::size_t>(k_of[m] * (k_of[m] - 1) / 2));
    }
    std::reverse(records.begin(), records.end());
    const auto again = pair_dual_targets(records, seqs, options);
    ASSERT_EQ(again.size(), triples.size());
    for (std::size_t i = 0; i < again.size(); ++i) {
      EXPECT_EQ(again[i].graph, triples[i].graph);
      EXPECT_EQ(again[i].protein_a, triples[i].protein_a);
      EXPECT_EQ(again[i].protein_b, triples[i].protein_b);
    }
  }
}

TEST(Pairing, CapLimitsPerMolecule) {
  const auto seqs = proteins(5);
  std::vector<LabeledRecord> records;
  for (int p = 0; p < 5; ++p) records.push_back(active("CCO", "Q" + std::to_string(p)));
  IngestOptions options;
  options.pair_cap = 4;
  IngestStats stats;
  const auto triples = pair_dual_targets(records, seqs, options, &stats);
  ASSERT_EQ(triples.size(), 4u);
  EXPECT_EQ(stats.capped_pairs, 6u);
  EXPECT_EQ(triples[0].protein_a, "Q0");
  EXPECT_EQ(triples[0].protein_b, "Q1");
  EXPECT_EQ(triples[3].protein_a, "Q0");
  EXPECT_EQ(triples[3].protein_b, "Q4");
}

TEST(Pipeline, MatchesExpectationFile) {
  const auto data = load_dataset(kData / "ingest_rows.tsv", kData / "ingest_proteins.fa");
  IngestStats stats;
  const auto triples = ingest(data, AtomVocab::standard(), {}, stats);
  EXPECT_EQ(format_triples(triples, AtomVocab::standard()), slurp(kData / "ingest_expected.tsv"));
  EXPECT_EQ(stats.skipped_rows, 2u);
  EXPECT_EQ(stats.parse_failures, 1u);
  EXPECT_EQ(stats.invalid, 1u);
  EXPECT_EQ(stats.oversize, 0u);
  EXPECT_EQ(stats.ambiguous, 2u);
  EXPECT_EQ(stats.conflicted, 2u);
  EXPECT_EQ(stats.unknown_protein, 1u);
  EXPECT_EQ(stats.single_target, 1u);
  EXPECT_EQ(stats.capped_pairs, 0u);
  for (const auto& t : triples) {
    EXPECT_TRUE(is_valid(t.graph, AtomVocab::standard()));
    EXPECT_NE(t.protein_a, "P9");
  }
}

TEST(Triples, FormatParseRoundTrip) {
  const std::string text = slurp(kData / "ingest_expected.tsv");
  const auto triples = parse_triples(text, AtomVocab::standard());
  ASSERT_EQ(triples.size(), 5u);
  EXPECT_EQ(format_triples(triples, AtomVocab::standard()), text);
  EXPECT_THROW(parse_triples("CCO\tP1\n", AtomVocab::standard()), DataError);
  EXPECT_THROW(parse_triples("C(\tP1\tP2\n", AtomVocab::standard()), DataError);
}
