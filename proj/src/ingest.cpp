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

#include "ddtm/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "ddtm/error.hpp"
#include "ddtm/smiles.hpp"

namespace ddtm {

std::string_view measure_name(Measure m) {
  switch (m) {
    case Measure::kIC50: return "IC50";
    case Measure::kKd: return "Kd";
    case Measure::kKi: return "Ki";
    case Measure::kEC50: return "EC50";
  }
  return "IC50";
}

Measure parse_measure(std::string_view text) {
  if (text == "IC50") return Measure::kIC50;
  if (text == "Kd") return Measure::kKd;
  if (text == "Ki") return Measure::kKi;
  if (text == "EC50") return Measure::kEC50;
  throw DataError("unknown measure '" + std::string(text) + "'");
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

bool parse_positive(std::string_view text, double& value) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end && std::isfinite(value) && value > 0.0;
}

}  // namespace

std::vector<DatasetRecord> load_records(const std::filesystem::path& path, std::size_t* skipped) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open records file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_tabs(line);
  auto column = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path.string() + ": header lacks column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_smiles = column("smiles");
  const std::size_t c_protein = column("protein_id");
  const std::size_t c_measure = column("measure");
  const std::size_t c_value = column("value_nM");

  std::vector<DatasetRecord> out;
  std::size_t bad = 0;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != header.size()) {
      ++bad;
      continue;
    }
    DatasetRecord r;
    r.line = number;
    r.smiles = std::string(fields[c_smiles]);
    r.protein_id = std::string(fields[c_protein]);
    try {
      r.measure = parse_measure(fields[c_measure]);
    } catch (const DataError&) {
      ++bad;
      continue;
    }
    if (r.smiles.empty() || r.protein_id.empty() || !parse_positive(fields[c_value], r.value_nm)) {
      ++bad;
      continue;
    }
    out.push_back(std::move(r));
  }
  if (skipped) *skipped = bad;
  return out;
}

LoadedDataset load_dataset(const std::filesystem::path& records_path, const std::filesystem::path& fasta_path) {
  LoadedDataset data;
  data.records = load_records(records_path, &data.skipped_rows);
  data.sequences = read_fasta(fasta_path);
  return data;
}

Activity label_bioactivity(const DatasetRecord& record) {
  if (record.value_nm < kActiveBelowNm) return Activity::kActive;
  if (record.value_nm > kInactiveAboveNm) return Activity::kInactive;
  return Activity::kAmbiguous;
}

std::vector<LabeledRecord> label_records(const std::vector<DatasetRecord>& records, const AtomVocab& vocab,
                                         const IngestOptions& options, IngestStats& stats) {
  std::vector<LabeledRecord> out;
  for (const DatasetRecord& r : records) {
    MolGraph graph;
    try {
      graph = parse_smiles(r.smiles, vocab);
    } catch (const DataError&) {
      ++stats.parse_failures;
      continue;
    }
    if (!is_valid(graph, vocab)) {
      ++stats.invalid;
      continue;
    }
    if (graph.size() > options.size_cap) {
      ++stats.oversize;
      continue;
    }
    const Activity label = label_bioactivity(r);
    if (label == Activity::kAmbiguous) ++stats.ambiguous;
    auto labeling = canonical_labeling(graph);
    out.push_back({std::move(labeling.key), r.protein_id, label, std::move(graph)});
  }
  return out;
}

std::vector<LabeledRecord> resolve_conflicts(const std::vector<LabeledRecord>& records, IngestStats* stats) {
  std::map<std::pair<std::string, std::string>, std::pair<bool, bool>> seen;
  for (const auto& r : records) {
    auto& flags = seen[{r.key, r.protein_id}];
    if (r.label == Activity::kActive) flags.first = true;
    if (r.label == Activity::kInactive) flags.second = true;
  }
  std::vector<LabeledRecord> out;
  std::set<std::tuple<std::string, std::string, Activity>> kept;
  for (const auto& r : records) {
    const auto flags = seen.at({r.key, r.protein_id});
    if (flags.first && flags.second) {
      if (stats) ++stats->conflicted;
      continue;
    }
    if (kept.insert({r.key, r.protein_id, r.label}).second) out.push_back(r);
  }
  return out;
}

std::vector<TrainingTriple> pair_dual_targets(const std::vector<LabeledRecord>& records,
                                              const std::vector<ProteinSequence>& sequences,
                                              const IngestOptions& options, IngestStats* stats) {
  std::set<std::string> known;
  for (const auto& s : sequences) known.insert(s.id);
  struct Group {
    const MolGraph* graph = nullptr;
    std::set<std::string> proteins;
  };
  std::map<std::string, Group> groups;
  for (const auto& r : records) {
    if (r.label != Activity::kActive) continue;
    if (!known.count(r.protein_id)) {
      if (stats) ++stats->unknown_protein;
      continue;
    }
    Group& g = groups[r.key];
    if (!g.graph) g.graph = &r.graph;
    g.proteins.insert(r.protein_id);
  }
  std::vector<TrainingTriple> out;
  for (const auto& [key, group] : groups) {
    if (group.proteins.size() < 2) {
      if (stats) ++stats->single_target;
      continue;
    }
    const std::vector<std::string> ids(group.proteins.begin(), group.proteins.end());
    int emitted = 0;
    for (std::size_t a = 0; a < ids.size(); ++a) {
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        if (emitted == options.pair_cap) {
          if (stats) ++stats->capped_pairs;
          continue;
        }
        out.push_back({*group.graph, ids[a], ids[b]});
        ++emitted;
      }
    }
  }
  return out;
}

std::vector<TrainingTriple> ingest(const LoadedDataset& data, const AtomVocab& vocab, const IngestOptions& options,
                                   IngestStats& stats) {
  stats.skipped_rows = data.skipped_rows;
  const auto labeled = label_records(data.records, vocab, options, stats);
  const auto resolved = resolve_conflicts(labeled, &stats);
  return pair_dual_targets(resolved, data.sequences, options, &stats);
}

std::string format_triples(const std::vector<TrainingTriple>& triples, const AtomVocab& vocab) {
  std::string out;
  for (const auto& t : triples) {
    out += write_smiles(t.graph, vocab);
    out += '\t';
    out += t.protein_a;
    out += '\t';
    out += t.protein_b;
    out += '\n';
  }
  return out;
}

std::vector<TrainingTriple> parse_triples(std::string_view text, const AtomVocab& vocab) {
  std::vector<TrainingTriple> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw DataError("triples line " + std::to_string(number) + ": expected 3 tab-separated fields");
    }
    out.push_back({parse_smiles(fields[0], vocab), std::string(fields[1]), std::string(fields[2])});
  }
  return out;
}

}  // namespace ddtm
