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

#include "ddtm/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"

#include "ddtm/error.hpp"

namespace ddtm {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("train config: lambda must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw UsageError("train config: lr must be > 0");
  for (double p : {beta1, beta2, dropout_p}) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("train config: probabilities must lie in [0, 1]");
  }
  if (beta1 >= 1.0 || beta2 >= 1.0) throw UsageError("train config: moment decay must be < 1");
  if (!(eps > 0.0)) throw UsageError("train config: eps must be > 0");
  if (batch_size < 1 || steps < 0 || checkpoint_interval < 0 || size_cap < 1) {
    throw UsageError("train config: batch_size and size_cap must be >= 1, steps >= 0");
  }
}

namespace {

int default_valence(const std::string& symbol) {
  static const std::map<std::string, int> table = {{"B", 3},  {"C", 4},  {"N", 3},  {"O", 2},  {"F", 1},
                                                   {"P", 5},  {"S", 6},  {"Cl", 1}, {"Br", 1}, {"I", 1}};
  const auto it = table.find(symbol);
  if (it == table.end()) throw UsageError("config: no default valence for '" + symbol + "'; give [symbol, valence]");
  return it->second;
}

template <typename T>
void read_field(const json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: bad value for ") + name + " (" + e.what() + ")");
  }
}

}  // namespace

RunConfig RunConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config: malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw UsageError("config: expected a JSON object");
  static const std::set<std::string> known = {
      "d",     "heads",      "fuse_layers", "gt_layers", "T",     "lambda",   "lr",
      "beta1", "beta2",      "eps",         "batch_size", "steps", "dropout_p", "seed",
      "size_cap", "vocab",   "strategy",    "protein_dim", "checkpoint_interval"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw UsageError("config: unknown field " + item.key());
  }
  RunConfig c;
  read_field(j, "d", c.model.width);
  read_field(j, "heads", c.model.heads);
  read_field(j, "fuse_layers", c.model.fuse_layers);
  read_field(j, "gt_layers", c.model.gt_layers);
  read_field(j, "T", c.model.steps);
  read_field(j, "protein_dim", c.model.protein_dim);
  read_field(j, "lambda", c.train.lambda);
  read_field(j, "lr", c.train.lr);
  read_field(j, "beta1", c.train.beta1);
  read_field(j, "beta2", c.train.beta2);
  read_field(j, "eps", c.train.eps);
  read_field(j, "batch_size", c.train.batch_size);
  read_field(j, "steps", c.train.steps);
  read_field(j, "dropout_p", c.train.dropout_p);
  read_field(j, "seed", c.train.seed);
  read_field(j, "size_cap", c.train.size_cap);
  read_field(j, "checkpoint_interval", c.train.checkpoint_interval);
  if (j.contains("strategy")) {
    if (!j["strategy"].is_string()) throw UsageError("config: strategy must be a string");
    c.model.strategy = parse_fusion(j["strategy"].get<std::string>());
  }
  if (j.contains("vocab")) {
    const json& v = j["vocab"];
    if (!v.is_array() || v.empty()) throw UsageError("config: vocab must be a nonempty array");
    std::vector<std::string> symbols;
    std::vector<int> valences;
    for (const json& entry : v) {
      if (entry.is_string()) {
        symbols.push_back(entry.get<std::string>());
        valences.push_back(default_valence(symbols.back()));
      } else if (entry.is_array() && entry.size() == 2 && entry[0].is_string() && entry[1].is_number_integer()) {
        symbols.push_back(entry[0].get<std::string>());
        valences.push_back(entry[1].get<int>());
      } else {
        throw UsageError("config: vocab entries must be symbols or [symbol, valence] pairs");
      }
    }
    c.vocab = AtomVocab(std::move(symbols), std::move(valences));
  }
  c.model.atom_classes = c.vocab.size();
  c.model.seed = c.train.seed;
  c.model.validate();
  c.train.validate();
  return c;
}

std::string RunConfig::to_json() const {
  json v = json::array();
  for (int k = 0; k < vocab.size(); ++k) v.push_back(json::array({vocab.symbol(k), vocab.max_valence(k)}));
  json j = {{"d", model.width},
            {"heads", model.heads},
            {"fuse_layers", model.fuse_layers},
            {"gt_layers", model.gt_layers},
            {"T", model.steps},
            {"protein_dim", model.protein_dim},
            {"strategy", std::string(fusion_name(model.strategy))},
            {"lambda", train.lambda},
            {"lr", train.lr},
            {"beta1", train.beta1},
            {"beta2", train.beta2},
            {"eps", train.eps},
            {"batch_size", train.batch_size},
            {"steps", train.steps},
            {"dropout_p", train.dropout_p},
            {"seed", train.seed},
            {"size_cap", train.size_cap},
            {"checkpoint_interval", train.checkpoint_interval},
            {"vocab", v}};
  return j.dump();
}

void NodeCountHistogram::validate() const {
  if (probabilities.empty()) throw UsageError("node-count histogram is empty");
  double total = 0.0;
  for (const auto& [n, p] : probabilities) {
    if (n < 1) throw UsageError("node-count histogram: count " + std::to_string(n) + " < 1");
    if (!(p >= 0.0)) throw UsageError("node-count histogram: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("node-count histogram does not sum to 1");
}

DataCounts DataCounts::from_graphs(std::span<const MolGraph> graphs, int atom_classes, int bond_classes) {
  DataCounts c;
  c.atoms.assign(atom_classes, 0);
  c.bonds.assign(bond_classes, 0);
  for (const MolGraph& g : graphs) {
    c.sizes[g.size()] += 1;
    for (int i = 0; i < g.size(); ++i) {
      c.atoms.at(g.atom(i)) += 1;
      for (int j = i + 1; j < g.size(); ++j) c.bonds.at(g.bond(i, j)) += 1;
    }
  }
  return c;
}

namespace {

std::vector<double> frequencies(const std::vector<std::uint64_t>& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  std::vector<double> out(counts.size(), 0.0);
  if (total == 0) {
    // No observations (e.g. only single-atom molecules have no pairs): fall back to uniform.
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return out;
  }
  for (std::size_t k = 0; k < counts.size(); ++k) out[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
  return out;
}

}  // namespace

Marginals DataCounts::marginals() const { return {frequencies(atoms), frequencies(bonds)}; }

NodeCountHistogram DataCounts::histogram() const {
  std::uint64_t total = 0;
  for (const auto& [n, c] : sizes) total += c;
  NodeCountHistogram h;
  for (const auto& [n, c] : sizes) h.probabilities[n] = static_cast<double>(c) / static_cast<double>(total);
  return h;
}

AdamState AdamState::zeros(const DenoiserParams& params) {
  AdamState s;
  for (const auto& t : params.tensors()) {
    s.m.emplace_back(t.value.rows, t.value.cols);
    s.v.emplace_back(t.value.rows, t.value.cols);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Checkpoint container.

namespace {

constexpr char kMagic[4] = {'D', 'D', 'T', 'M'};

struct RawTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

RawTensor raw(std::string name, std::vector<std::uint32_t> dims, std::span<const double> values) {
  RawTensor r{std::move(name), std::move(dims), {}};
  r.data.reserve(values.size());
  for (double v : values) r.data.push_back(static_cast<float>(v));
  return r;
}

RawTensor raw_matrix(std::string name, const Tensor& t) {
  return raw(std::move(name), {static_cast<std::uint32_t>(t.rows), static_cast<std::uint32_t>(t.cols)}, t.data);
}

// Integers are stored as four base-2^16 digits (rows x 4) so every float is exact.
RawTensor raw_integers(std::string name, std::span<const std::uint64_t> values) {
  std::vector<double> digits;
  for (auto value : values) {
    for (int k = 3; k >= 0; --k) digits.push_back(static_cast<double>((value >> (16 * k)) & 0xffff));
  }
  return raw(std::move(name), {static_cast<std::uint32_t>(values.size()), 4}, digits);
}

RawTensor raw_integer(std::string name, std::uint64_t value) {
  const std::uint64_t one[] = {value};
  return raw_integers(std::move(name), one);
}

std::vector<std::uint64_t> integers_of(const RawTensor& t) {
  if (t.dims.size() != 2 || t.dims[1] != 4) {
    throw DataError("checkpoint: tensor " + t.name + " is not an integer record");
  }
  std::vector<std::uint64_t> out;
  for (std::size_t r = 0; r < t.dims[0]; ++r) {
    std::uint64_t value = 0;
    for (int k = 0; k < 4; ++k) value = (value << 16) | static_cast<std::uint64_t>(t.data[r * 4 + k]);
    out.push_back(value);
  }
  return out;
}

std::uint64_t integer_of(const RawTensor& t) {
  const auto values = integers_of(t);
  if (values.size() != 1) throw DataError("checkpoint: tensor " + t.name + " is not a single integer");
  return values[0];
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated data");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<RawTensor> tensors;
  const std::string config = ckpt.config.to_json();
  std::vector<double> config_bytes;
  for (unsigned char c : config) config_bytes.push_back(c);
  tensors.push_back(raw("meta.config_json", {static_cast<std::uint32_t>(config_bytes.size())}, config_bytes));
  tensors.push_back(raw_integer("meta.step", static_cast<std::uint64_t>(ckpt.step)));
  tensors.push_back(raw_integer("meta.adam_step", static_cast<std::uint64_t>(ckpt.optimizer.step)));
  tensors.push_back(raw_integers("data.atom_counts", ckpt.counts.atoms));
  tensors.push_back(raw_integers("data.bond_counts", ckpt.counts.bonds));
  std::vector<std::uint64_t> sizes;
  for (const auto& [n, c] : ckpt.counts.sizes) {
    sizes.push_back(static_cast<std::uint64_t>(n));
    sizes.push_back(c);
  }
  tensors.push_back(raw_integers("data.node_counts", sizes));
  const auto& params = ckpt.params.tensors();
  for (const auto& t : params) tensors.push_back(raw_matrix("param." + t.name, t.value));
  for (std::size_t k = 0; k < params.size() && k < ckpt.optimizer.m.size(); ++k) {
    tensors.push_back(raw_matrix("adam.m." + params[k].name, ckpt.optimizer.m[k]));
    tensors.push_back(raw_matrix("adam.v." + params[k].name, ckpt.optimizer.v[k]));
  }
  for (const auto& [id, e] : ckpt.proteins) {
    tensors.push_back(raw("protein." + id + ".cls", {static_cast<std::uint32_t>(e.dim)}, e.cls));
    tensors.push_back(raw("protein." + id + ".tokens",
                          {static_cast<std::uint32_t>(e.length()), static_cast<std::uint32_t>(e.dim)}, e.tokens));
  }

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
  }
  for (const auto& t : tensors) {
    for (float v : t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (in.text(4) != std::string(kMagic, 4)) throw DataError("checkpoint: bad magic (expected DDTM)");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<RawTensor> tensors(count);
  for (auto& t : tensors) {
    t.name = in.text(in.u32());
    const std::uint32_t rank = in.u32();
    if (rank > 8) throw DataError("checkpoint: tensor " + t.name + " has implausible rank");
    t.dims.resize(rank);
    for (auto& d : t.dims) d = in.u32();
  }
  std::map<std::string, const RawTensor*> by_name;
  for (auto& t : tensors) {
    std::size_t size = 1;
    for (auto d : t.dims) size *= d;
    if (size > bytes.size()) throw DataError("checkpoint: truncated data");
    t.data.resize(size);
    for (auto& v : t.data) v = in.f32();
    if (!by_name.emplace(t.name, &t).second) throw DataError("checkpoint: duplicate tensor " + t.name);
  }
  if (!in.done()) throw DataError("checkpoint: trailing bytes");

  auto get = [&](const std::string& name) -> const RawTensor& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint: missing tensor " + name);
    return *it->second;
  };
  auto doubles = [](const RawTensor& t) { return std::vector<double>(t.data.begin(), t.data.end()); };
  auto matrix = [&](const std::string& name, int rows, int cols) {
    const RawTensor& t = get(name);
    if (t.dims.size() != 2 || t.dims[0] != static_cast<std::uint32_t>(rows) ||
        t.dims[1] != static_cast<std::uint32_t>(cols)) {
      throw DataError("checkpoint: tensor " + name + " has the wrong shape");
    }
    return Tensor(rows, cols, doubles(t));
  };

  Checkpoint ckpt;
  std::string config;
  for (float c : get("meta.config_json").data) config.push_back(static_cast<char>(static_cast<unsigned char>(c)));
  try {
    ckpt.config = RunConfig::from_json(config);
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint: bad config record: ") + e.what());
  }
  ckpt.step = static_cast<std::int64_t>(integer_of(get("meta.step")));
  ckpt.optimizer.step = static_cast<std::int64_t>(integer_of(get("meta.adam_step")));
  ckpt.counts.atoms = integers_of(get("data.atom_counts"));
  ckpt.counts.bonds = integers_of(get("data.bond_counts"));
  const auto sizes = integers_of(get("data.node_counts"));
  for (std::size_t k = 0; k + 1 < sizes.size(); k += 2) ckpt.counts.sizes[static_cast<int>(sizes[k])] = sizes[k + 1];
  if (ckpt.counts.atoms.size() != static_cast<std::size_t>(ckpt.config.model.atom_classes) ||
      ckpt.counts.bonds.size() != static_cast<std::size_t>(ckpt.config.model.bond_classes) ||
      ckpt.counts.sizes.empty()) {
    throw DataError("checkpoint: data counts do not match the config");
  }
  ckpt.marginals = ckpt.counts.marginals();
  ckpt.histogram = ckpt.counts.histogram();

  std::vector<NamedTensor> params;
  for (const auto& [name, shape] : parameter_shapes(ckpt.config.model)) {
    params.push_back({name, matrix("param." + name, shape.first, shape.second)});
    if (by_name.count("adam.m." + name)) {
      ckpt.optimizer.m.push_back(matrix("adam.m." + name, shape.first, shape.second));
      ckpt.optimizer.v.push_back(matrix("adam.v." + name, shape.first, shape.second));
    }
  }
  if (!ckpt.optimizer.m.empty() && ckpt.optimizer.m.size() != params.size()) {
    throw DataError("checkpoint: optimizer state is incomplete");
  }
  ckpt.params = DenoiserParams(ckpt.config.model, std::move(params));

  const std::string prefix = "protein.";
  const std::string suffix = ".cls";
  for (const auto& [name, t] : by_name) {
    if (name.rfind(prefix, 0) != 0 || name.size() <= prefix.size() + suffix.size() ||
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    ProteinEmbedding e;
    e.id = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    e.cls = doubles(*t);
    e.dim = static_cast<int>(e.cls.size());
    const RawTensor& tokens = get(prefix + e.id + ".tokens");
    if (tokens.dims.size() != 2 || tokens.dims[1] != static_cast<std::uint32_t>(e.dim)) {
      throw DataError("checkpoint: protein " + e.id + " token shape mismatch");
    }
    e.tokens = doubles(tokens);
    ckpt.proteins.emplace(e.id, std::move(e));
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

// ---------------------------------------------------------------------------

double loss(const PredictedDistributions& pred, const MolGraph& clean, double lambda) {
  if (pred.n != clean.size() || pred.atom_classes != clean.atom_classes() ||
      pred.bond_classes != clean.bond_classes()) {
    throw UsageError("loss: prediction and graph shapes differ");
  }
  constexpr double kFloor = 1e-12;
  double nodes = 0.0;
  for (int i = 0; i < pred.n; ++i) nodes -= std::log(std::max(pred.atom(i)[clean.atom(i)], kFloor));
  double edges = 0.0;
  for (int i = 0; i < pred.n; ++i) {
    for (int j = i + 1; j < pred.n; ++j) edges -= 2.0 * std::log(std::max(pred.bond(i, j)[clean.bond(i, j)], kFloor));
  }
  return nodes + lambda * edges;
}

double train_step(DenoiserParams& params, std::span<const TrainingExample> batch, const NoiseSchedule& schedule,
                  const Marginals& marginals, AdamState& optimizer, const TrainConfig& config, Rng& rng) {
  if (batch.empty()) throw UsageError("train_step: empty batch");
  auto& tensors = params.tensors();
  if (optimizer.m.size() != tensors.size()) optimizer = AdamState::zeros(params);

  std::vector<Tensor> total;
  for (const auto& t : tensors) total.emplace_back(t.value.rows, t.value.cols);
  double loss_sum = 0.0;
  const auto null_ctx = ConditionContext::null_context();
  for (const TrainingExample& item : batch) {
    const int t = static_cast<int>(uniform_int(rng, 1, static_cast<std::uint64_t>(schedule.steps())));
    const MolGraph noisy = forward_sample(item.graph, t, schedule, marginals, rng);
    const bool drop = uniform01(rng) < config.dropout_p;
    const ConditionContext& ctx = drop ? null_ctx : item.context;
    auto result = backward(params, noisy, ctx, t, item.graph, config.lambda);
    loss_sum += result.loss;
    for (std::size_t k = 0; k < total.size(); ++k) {
      auto& acc = total[k].data;
      const auto& g = result.gradients[k].data;
      for (std::size_t q = 0; q < acc.size(); ++q) acc[q] += g[q];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < total.size(); ++k) {
    for (double g : total[k].data) {
      if (!std::isfinite(g * inv)) throw NumericError("train_step: non-finite gradient for " + tensors[k].name);
    }
  }

  optimizer.step += 1;
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(optimizer.step));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(optimizer.step));
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    auto& p = tensors[k].value.data;
    auto& m = optimizer.m[k].data;
    auto& v = optimizer.v[k].data;
    const auto& g = total[k].data;
    for (std::size_t q = 0; q < p.size(); ++q) {
      const double grad = g[q] * inv;
      m[q] = config.beta1 * m[q] + (1.0 - config.beta1) * grad;
      v[q] = config.beta2 * v[q] + (1.0 - config.beta2) * grad * grad;
      const double m_hat = m[q] / correction1;
      const double v_hat = v[q] / correction2;
      p[q] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    round_to_float(p);
    round_to_float(m);
    round_to_float(v);
  }
  return loss_sum * inv;
}

namespace {

ProteinEmbedding storable(const ProteinEmbedding& e) {
  ProteinEmbedding out = e;
  round_to_float(out.cls);
  round_to_float(out.tokens);
  return out;
}

}  // namespace

ConditionContext checkpoint_context(const Checkpoint& ckpt, const std::string& protein_a,
                                    const std::string& protein_b) {
  auto find = [&](const std::string& id) -> const ProteinEmbedding& {
    const auto it = ckpt.proteins.find(id);
    if (it == ckpt.proteins.end()) throw UsageError("checkpoint has no embedding for protein " + id);
    return it->second;
  };
  return pair_context(find(protein_a), find(protein_b), ckpt.config.model.strategy);
}

TrainReport train(const std::vector<TrainingTriple>& triples, const EmbeddingMap& embeddings,
                  const RunConfig& config, const std::function<void(const Checkpoint&)>& on_checkpoint) {
  config.train.validate();
  TrainReport report;
  Checkpoint& ckpt = report.checkpoint;
  ckpt.config = config;
  ckpt.config.model.atom_classes = config.vocab.size();
  ckpt.config.model.seed = config.train.seed;

  std::vector<const TrainingTriple*> kept;
  for (const auto& t : triples) {
    if (t.graph.atom_classes() != config.vocab.size() || t.graph.bond_classes() != ckpt.config.model.bond_classes) {
      throw DataError("train: molecule class counts do not match the vocabulary");
    }
    if (t.graph.size() > config.train.size_cap) {
      ++report.skipped_oversize;
      continue;
    }
    if (t.graph.size() < 1) throw DataError("train: empty molecule in dataset");
    if (t.protein_a.empty() != t.protein_b.empty()) throw DataError("train: triple with a single protein id");
    if (!t.protein_a.empty()) {
      for (const auto* id : {&t.protein_a, &t.protein_b}) {
        const auto it = embeddings.find(*id);
        if (it == embeddings.end()) throw DataError("train: no embedding for protein " + *id);
        if (!ckpt.proteins.count(*id)) ckpt.proteins.emplace(*id, storable(it->second));
      }
    }
    kept.push_back(&t);
  }
  if (kept.empty()) throw DataError("train: empty dataset");
  if (!ckpt.proteins.empty()) {
    const int dim = ckpt.proteins.begin()->second.dim;
    for (const auto& [id, e] : ckpt.proteins) {
      if (e.dim != dim) throw DataError("train: protein embeddings differ in width");
    }
    ckpt.config.model.protein_dim = dim;
  }
  const DenoiserConfig& model = ckpt.config.model;
  model.validate();

  std::vector<TrainingExample> examples;
  std::vector<MolGraph> graphs;
  for (const auto* t : kept) {
    ConditionContext ctx = t->protein_a.empty() ? ConditionContext::null_context()
                                                : checkpoint_context(ckpt, t->protein_a, t->protein_b);
    examples.push_back({t->graph, std::move(ctx)});
    graphs.push_back(t->graph);
  }
  ckpt.counts = DataCounts::from_graphs(graphs, model.atom_classes, model.bond_classes);
  ckpt.marginals = ckpt.counts.marginals();
  ckpt.histogram = ckpt.counts.histogram();

  Rng init_rng(derive_seed(config.train.seed, 0));
  ckpt.params = init_params(model, init_rng);
  ckpt.optimizer = AdamState::zeros(ckpt.params);
  const NoiseSchedule schedule = cosine_schedule(model.steps);

  Rng rng(derive_seed(config.train.seed, 1));
  std::vector<std::size_t> order(examples.size());
  std::size_t cursor = order.size();
  std::vector<TrainingExample> batch;
  for (int step = 0; step < config.train.steps; ++step) {
    batch.clear();
    while (static_cast<int>(batch.size()) < config.train.batch_size) {
      if (cursor == order.size()) {
        // Fisher-Yates with the portable integer sampler.
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[uniform_int(rng, 0, k - 1)]);
        cursor = 0;
      }
      batch.push_back(examples[order[cursor++]]);
    }
    report.losses.push_back(
        train_step(ckpt.params, batch, schedule, ckpt.marginals, ckpt.optimizer, ckpt.config.train, rng));
    ckpt.step = step + 1;
    if (on_checkpoint && config.train.checkpoint_interval > 0 &&
        ckpt.step % config.train.checkpoint_interval == 0) {
      on_checkpoint(ckpt);
    }
  }
  return report;
}

}  // namespace ddtm
