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

#include "ddtm/metrics.hpp"

#include "json.hpp"

#include "ddtm/error.hpp"

namespace ddtm {

namespace {

std::vector<const MolGraph*> valid_graphs(std::span<const MolGraph> graphs, const AtomVocab& vocab) {
  std::vector<const MolGraph*> out;
  for (const auto& g : graphs) {
    if (is_valid(g, vocab)) out.push_back(&g);
  }
  return out;
}

FractionResult fraction(std::size_t num, std::size_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

FractionResult validity_rate(std::span<const MolGraph> graphs, const AtomVocab& vocab) {
  return fraction(valid_graphs(graphs, vocab).size(), graphs.size());
}

FractionResult uniqueness(std::span<const MolGraph> graphs, const AtomVocab& vocab) {
  const auto valid = valid_graphs(graphs, vocab);
  std::set<std::string> keys;
  for (const auto* g : valid) keys.insert(canonical_form(*g));
  return fraction(keys.size(), valid.size());
}

FractionResult novelty(std::span<const MolGraph> graphs, const std::set<std::string>& train_keys,
                       const AtomVocab& vocab) {
  const auto valid = valid_graphs(graphs, vocab);
  std::size_t novel = 0;
  for (const auto* g : valid) novel += train_keys.count(canonical_form(*g)) == 0;
  return fraction(novel, valid.size());
}

double diversity(std::span<const Fingerprint> fingerprints) {
  if (fingerprints.size() < 2) throw UsageError("diversity needs at least 2 valid molecules");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < fingerprints.size(); ++a) {
    for (std::size_t b = a + 1; b < fingerprints.size(); ++b) {
      sum += 1.0 - tanimoto(fingerprints[a], fingerprints[b]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double diversity(std::span<const MolGraph> graphs, const AtomVocab& vocab) {
  std::vector<Fingerprint> fps;
  for (const auto* g : valid_graphs(graphs, vocab)) fps.push_back(fingerprint(*g));
  return diversity(fps);
}

MetricsReport report(std::span<const MetricsInput> inputs, const std::set<std::string>& train_keys,
                     const AtomVocab& vocab) {
  MetricsReport r;
  r.total = inputs.size();
  std::set<std::string> seen;
  std::vector<Fingerprint> fps;
  for (const auto& in : inputs) {
    MoleculeFlags flags;
    if (in.parsed && is_valid(in.graph, vocab)) {
      flags.valid = true;
      flags.key = canonical_form(in.graph);
      flags.first_occurrence = seen.insert(flags.key).second;
      flags.novel = train_keys.count(flags.key) == 0;
      ++r.valid;
      r.unique += flags.first_occurrence;
      r.novel += flags.novel;
      fps.push_back(fingerprint(in.graph));
    }
    r.molecules.push_back(std::move(flags));
  }
  const auto validity = fraction(r.valid, r.total);
  const auto unique = fraction(r.unique, r.valid);
  const auto novel = fraction(r.novel, r.valid);
  r.validity = validity.value;
  r.uniqueness = unique.value;
  r.novelty = novel.value;
  if (validity.warning) r.warnings.push_back("empty molecule list: validity defined as 0");
  if (r.total > 0 && unique.warning) r.warnings.push_back("no valid molecules: uniqueness and novelty defined as 0");
  if (fps.size() >= 2) {
    r.diversity = diversity(fps);
    r.diversity_defined = true;
  } else {
    r.warnings.push_back("fewer than 2 valid molecules: diversity undefined");
  }
  return r;
}

MetricsReport report(std::span<const MolGraph> graphs, const std::set<std::string>& train_keys,
                     const AtomVocab& vocab) {
  std::vector<MetricsInput> inputs;
  inputs.reserve(graphs.size());
  for (const auto& g : graphs) inputs.push_back({true, g});
  return report(inputs, train_keys, vocab);
}

std::string MetricsReport::to_json() const {
  nlohmann::json mols = nlohmann::json::array();
  for (const auto& m : molecules) {
    mols.push_back({{"valid", m.valid}, {"unique", m.first_occurrence}, {"novel", m.novel}, {"key", m.key}});
  }
  nlohmann::json j = {{"total", total},
                      {"valid", valid},
                      {"unique", unique},
                      {"novel", novel},
                      {"validity", validity},
                      {"uniqueness", uniqueness},
                      {"novelty", novelty},
                      {"diversity", diversity_defined ? nlohmann::json(diversity) : nlohmann::json(nullptr)},
                      {"warnings", warnings},
                      {"molecules", mols}};
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(std::string_view text) {
  MetricsReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.total = j.at("total").get<std::size_t>();
    r.valid = j.at("valid").get<std::size_t>();
    r.unique = j.at("unique").get<std::size_t>();
    r.novel = j.at("novel").get<std::size_t>();
    r.validity = j.at("validity").get<double>();
    r.uniqueness = j.at("uniqueness").get<double>();
    r.novelty = j.at("novelty").get<double>();
    r.diversity_defined = !j.at("diversity").is_null();
    if (r.diversity_defined) r.diversity = j.at("diversity").get<double>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& m : j.at("molecules")) {
      r.molecules.push_back({m.at("valid").get<bool>(), m.at("unique").get<bool>(), m.at("novel").get<bool>(),
                             m.at("key").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics report: ") + e.what());
  }
  return r;
}

}  // namespace ddtm
