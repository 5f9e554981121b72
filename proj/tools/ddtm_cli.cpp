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

// Command-line front end: ingest, train, sample, eval, inspect, schedule.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "ddtm/condition.hpp"
#include "ddtm/diffusion.hpp"
#include "ddtm/error.hpp"
#include "ddtm/ingest.hpp"
#include "ddtm/metrics.hpp"
#include "ddtm/sampler.hpp"
#include "ddtm/smiles.hpp"
#include "ddtm/trainer.hpp"

namespace {

using namespace ddtm;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

void print_stats(const IngestStats& s, std::ostream& out) {
  out << "ingest: skipped_rows=" << s.skipped_rows << " parse_failures=" << s.parse_failures
      << " invalid=" << s.invalid << " oversize=" << s.oversize << " ambiguous=" << s.ambiguous
      << " conflicted=" << s.conflicted << " unknown_protein=" << s.unknown_protein
      << " single_target=" << s.single_target << " capped_pairs=" << s.capped_pairs << "\n";
}

struct IngestArgs {
  std::string data;
  std::string fasta;
  std::string out;
  int size_cap = 38;
  int pair_cap = 10;
};

int run_ingest(const IngestArgs& a) {
  const auto data = load_dataset(a.data, a.fasta);
  IngestStats stats;
  const auto triples = ingest(data, AtomVocab::standard(), {a.size_cap, a.pair_cap}, stats);
  write_text(a.out, format_triples(triples, AtomVocab::standard()));
  print_stats(stats, std::cerr);
  std::cerr << "ingest: wrote " << triples.size() << " triples to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string fasta;
  std::string embeddings;
  bool kmer = false;
  int kmer_k = 3;
  std::string strategy = "cat";
  std::string config;
  std::string out;
  int pair_cap = 10;
};

int run_train(const TrainArgs& a) {
  if (a.embeddings.empty() == !a.kmer) throw UsageError("train: give exactly one of --embeddings <file> or --kmer");
  RunConfig config = a.config.empty() ? RunConfig{} : RunConfig::from_json(read_text(a.config));
  config.model.strategy = parse_fusion(a.strategy);
  if (config.model.strategy == Fusion::kNone) throw UsageError("train: --strategy must be ca, cat or vn");

  const auto data = load_dataset(a.data, a.fasta);
  IngestStats stats;
  const auto triples = ingest(data, config.vocab, {config.train.size_cap, a.pair_cap}, stats);
  print_stats(stats, std::cerr);
  if (triples.empty()) throw DataError("train: no molecule-dual-target triples after ingestion");

  EmbeddingMap embeddings;
  if (a.kmer) {
    for (const auto& p : data.sequences) embeddings.emplace(p.id, kmer_encode(p, config.model.protein_dim, a.kmer_k));
  } else {
    embeddings = load_embeddings(a.embeddings);
  }

  const auto report = train(triples, embeddings, config, [&](const Checkpoint& c) {
    save_checkpoint(c, a.out + ".step" + std::to_string(c.step));
    std::cerr << "train: checkpoint at step " << c.step << "\n";
  });
  save_checkpoint(report.checkpoint, a.out);

  std::set<std::string> seen;
  std::string keys;
  for (const auto& t : triples) {
    const std::string smiles = write_smiles(t.graph, config.vocab);
    if (seen.insert(smiles).second) keys += smiles + "\n";
  }
  write_text(a.out + ".train.smi", keys);
  const double last = report.losses.empty() ? 0.0 : report.losses.back();
  std::cerr << "train: " << triples.size() << " triples, " << report.checkpoint.step << " steps, final loss " << last
            << ", checkpoint " << a.out << "\n";
  return 0;
}

struct SampleArgs {
  std::string ckpt;
  std::string protein_a;
  std::string protein_b;
  bool unconditional = false;
  int count = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int run_sample(const SampleArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  ConditionContext ctx = ConditionContext::null_context();
  if (a.unconditional) {
    if (!a.protein_a.empty() || !a.protein_b.empty()) {
      throw UsageError("sample: --unconditional excludes --protein-a/--protein-b");
    }
  } else {
    if (a.protein_a.empty() || a.protein_b.empty()) {
      throw UsageError("sample: give --protein-a and --protein-b, or --unconditional");
    }
    ctx = checkpoint_context(ckpt, a.protein_a, a.protein_b);
  }
  const auto graphs = generate(ckpt, ctx, a.count, a.seed);
  write_text(a.out, format_generated(graphs, ckpt.config.vocab));
  std::cerr << "sample: wrote " << graphs.size() << " molecules to " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string generated;
  std::string train_keys;
  std::string config;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const RunConfig config = a.config.empty() ? RunConfig{} : RunConfig::from_json(read_text(a.config));
  const AtomVocab& vocab = config.vocab;
  SmilesOptions fragments;
  fragments.allow_fragments = true;

  std::vector<MetricsInput> inputs;
  std::istringstream lines(read_text(a.generated));
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    MetricsInput in;
    try {
      if (line.rfind("INVALID\t", 0) == 0) {
        in.graph = parse_edge_list(std::string_view(line).substr(8), vocab);
      } else {
        in.graph = parse_smiles(line.substr(0, line.find_first_of(" \t")), vocab, fragments);
      }
      in.parsed = true;
    } catch (const DataError&) {
      in.parsed = false;
    }
    inputs.push_back(std::move(in));
  }

  std::set<std::string> keys;
  for (const auto& entry : read_smiles_file(a.train_keys)) {
    keys.insert(canonical_form(parse_smiles(entry.text, vocab, fragments)));
  }
  const auto r = report(inputs, keys, vocab);
  const std::string json = r.to_json();
  if (a.out.empty() || a.out == "-") {
    std::cout << json << "\n";
  } else {
    write_text(a.out, json + "\n");
  }
  return 0;
}

int run_inspect(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  std::cout << "config: " << ckpt.config.to_json() << "\n";
  std::cout << "step: " << ckpt.step << "\n";
  std::cout << "parameters: " << ckpt.params.scalar_count() << " in " << ckpt.params.tensors().size()
            << " tensors\n";
  std::cout << std::setprecision(6);
  std::cout << "atom marginals:";
  for (int k = 0; k < ckpt.config.vocab.size(); ++k) {
    std::cout << " " << ckpt.config.vocab.symbol(k) << "=" << ckpt.marginals.atoms[k];
  }
  std::cout << "\nbond marginals:";
  for (std::size_t k = 0; k < ckpt.marginals.bonds.size(); ++k) std::cout << " " << k << "=" << ckpt.marginals.bonds[k];
  std::cout << "\nnode-count histogram:";
  for (const auto& [n, p] : ckpt.histogram.probabilities) std::cout << " " << n << ":" << p;
  std::cout << "\nproteins:";
  for (const auto& [id, e] : ckpt.proteins) std::cout << " " << id << "(" << e.length() << "x" << e.dim << ")";
  std::cout << "\n";
  return 0;
}

int run_schedule(int steps, const std::string& csv) {
  const NoiseSchedule s = cosine_schedule(steps);
  std::ostringstream out;
  out << std::setprecision(17) << "t,beta,alpha_bar\n";
  for (int t = 0; t <= s.steps(); ++t) out << t << "," << s.beta(t) << "," << s.alpha_bar(t) << "\n";
  if (csv.empty() || csv == "-") {
    std::cout << out.str();
  } else {
    write_text(csv, out.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete diffusion for dual-target molecule generation"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Filter and pair a bioactivity table into training triples");
  ingest_cmd->add_option("--data", ingest_args.data, "TSV with smiles, protein_id, measure, value_nM")->required();
  ingest_cmd->add_option("--fasta", ingest_args.fasta, "Protein sequences")->required();
  ingest_cmd->add_option("--out", ingest_args.out, "Output triples file")->required();
  ingest_cmd->add_option("--size-cap", ingest_args.size_cap, "Maximum heavy atoms");
  ingest_cmd->add_option("--pair-cap", ingest_args.pair_cap, "Maximum protein pairs per molecule");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a denoiser and write a checkpoint");
  train_cmd->add_option("--data", train_args.data, "TSV with smiles, protein_id, measure, value_nM")->required();
  train_cmd->add_option("--fasta", train_args.fasta, "Protein sequences")->required();
  train_cmd->add_option("--embeddings", train_args.embeddings, "JSONL protein embeddings");
  train_cmd->add_flag("--kmer", train_args.kmer, "Use the built-in k-mer protein encoder");
  train_cmd->add_option("--kmer-k", train_args.kmer_k, "k for --kmer");
  train_cmd->add_option("--strategy", train_args.strategy, "Fusion strategy: ca, cat or vn");
  train_cmd->add_option("--config", train_args.config, "JSON config");
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--pair-cap", train_args.pair_cap, "Maximum protein pairs per molecule");

  SampleArgs sample_args;
  auto* sample_cmd = app.add_subcommand("sample", "Generate molecules from a checkpoint");
  sample_cmd->add_option("--ckpt", sample_args.ckpt, "Checkpoint")->required();
  sample_cmd->add_option("--protein-a", sample_args.protein_a, "First target id");
  sample_cmd->add_option("--protein-b", sample_args.protein_b, "Second target id");
  sample_cmd->add_flag("--unconditional", sample_args.unconditional, "Use the null context");
  sample_cmd->add_option("--count", sample_args.count, "Number of molecules")->check(CLI::NonNegativeNumber);
  sample_cmd->add_option("--seed", sample_args.seed, "Master seed");
  sample_cmd->add_option("--out", sample_args.out, "Output SMILES file")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Validity, uniqueness, novelty and diversity of generated molecules");
  eval_cmd->add_option("--generated", eval_args.generated, "Generated SMILES file")->required();
  eval_cmd->add_option("--train-keys", eval_args.train_keys, "Training SMILES file")->required();
  eval_cmd->add_option("--config", eval_args.config, "JSON config (for the vocabulary)");
  eval_cmd->add_option("--out", eval_args.out, "JSON report path ('-' for stdout)");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print a checkpoint summary");
  inspect_cmd->add_option("--ckpt", inspect_path, "Checkpoint")->required();

  int schedule_steps = 100;
  std::string schedule_csv;
  auto* schedule_cmd = app.add_subcommand("schedule", "Print the cosine noise schedule as CSV");
  schedule_cmd->add_option("--T", schedule_steps, "Diffusion steps")->required();
  schedule_cmd->add_option("--plot-csv", schedule_csv, "CSV path ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*ingest_cmd) return run_ingest(ingest_args);
    if (*train_cmd) return run_train(train_args);
    if (*sample_cmd) return run_sample(sample_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*inspect_cmd) return run_inspect(inspect_path);
    if (*schedule_cmd) return run_schedule(schedule_steps, schedule_csv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
