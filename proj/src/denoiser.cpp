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

#include "ddtm/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "ddtm/error.hpp"

namespace ddtm {

void DenoiserConfig::validate() const {
  if (width < 1 || heads < 1 || fuse_layers < 1 || gt_layers < 1 || atom_classes < 1 ||
      bond_classes < 2 || steps < 1 || protein_dim < 1) {
    throw UsageError("denoiser config: all counts must be positive");
  }
  if (width % heads != 0) {
    throw UsageError("denoiser config: width " + std::to_string(width) + " is not divisible by " +
                     std::to_string(heads) + " heads");
  }
  if (strategy == Fusion::kNone) throw UsageError("denoiser config: strategy must be ca, cat or vn");
}

DenoiserParams::DenoiserParams(DenoiserConfig config, std::vector<NamedTensor> tensors)
    : config_(std::move(config)), tensors_(std::move(tensors)) {
  for (std::size_t k = 0; k < tensors_.size(); ++k) {
    if (!index_.emplace(tensors_[k].name, static_cast<int>(k)).second) {
      throw DataError("duplicate parameter tensor " + tensors_[k].name);
    }
  }
}

const Tensor& DenoiserParams::get(const std::string& name) const { return tensors_[index_of(name)].value; }

int DenoiserParams::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("no parameter tensor named " + name);
  return it->second;
}

std::size_t DenoiserParams::scalar_count() const {
  std::size_t total = 0;
  for (const auto& t : tensors_) total += t.value.size();
  return total;
}

namespace {

using ShapeList = std::vector<std::pair<std::string, std::pair<int, int>>>;

void add_linear(ShapeList& out, const std::string& name, int in, int out_width, bool bias = true) {
  out.push_back({name + ".w", {in, out_width}});
  if (bias) out.push_back({name + ".b", {1, out_width}});
}

void add_block_tail(ShapeList& out, const std::string& prefix, int d) {
  add_linear(out, prefix + ".ff1", d, 2 * d);
  add_linear(out, prefix + ".ff2", 2 * d, d);
  out.push_back({prefix + ".ln.g", {1, d}});
  out.push_back({prefix + ".ln.b", {1, d}});
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<std::pair<std::string, std::pair<int, int>>> parameter_shapes(const DenoiserConfig& config) {
  config.validate();
  const int d = config.width;
  const int p = config.protein_dim;
  ShapeList out;
  add_linear(out, "atom_embed", node_feature_width(config), d);
  add_linear(out, "bond_embed", config.bond_classes, d);
  add_linear(out, "time", d, d);
  out.push_back({"cond.null", {1, 2 * p}});
  add_linear(out, "cond.cat", d + 2 * p, d);
  if (config.strategy == Fusion::kCrossAttention) {
    out.push_back({"cond.sep", {1, p}});
    for (int l = 0; l < config.fuse_layers; ++l) {
      const std::string self = "fuse" + std::to_string(l) + ".self";
      add_linear(out, self + ".q", d, d, false);
      add_linear(out, self + ".k", d, d, false);
      add_linear(out, self + ".v", d, d, false);
      add_linear(out, self + ".o", d, d);
      add_block_tail(out, self, d);
      const std::string cross = "fuse" + std::to_string(l) + ".cross";
      add_linear(out, cross + ".q", d, d, false);
      add_linear(out, cross + ".k", p, d, false);
      add_linear(out, cross + ".v", p, d, false);
      add_linear(out, cross + ".o", d, d);
      add_block_tail(out, cross, d);
    }
  }
  if (config.strategy == Fusion::kVirtualNode) {
    add_linear(out, "cond.vn", 2 * p, d);
    out.push_back({"cond.vn.edge", {1, d}});
  }
  for (int l = 0; l < config.gt_layers; ++l) {
    const std::string gt = "gt" + std::to_string(l);
    add_linear(out, gt + ".q", d, d, false);
    add_linear(out, gt + ".k", d, d, false);
    add_linear(out, gt + ".v", d, d, false);
    add_linear(out, gt + ".e", d, d, false);
    add_linear(out, gt + ".oh", d, d);
    add_linear(out, gt + ".oe", d, d);
    add_block_tail(out, gt + ".node", d);
    add_block_tail(out, gt + ".edge", d);
  }
  add_linear(out, "head_x.1", d, d);
  add_linear(out, "head_x.2", d, config.atom_classes);
  add_linear(out, "head_e.1", 2 * d, d);
  add_linear(out, "head_e.2", d, config.bond_classes);
  return out;
}

std::size_t parameter_count(const DenoiserConfig& config) {
  config.validate();
  const std::size_t d = config.width;
  const std::size_t p = config.protein_dim;
  const std::size_t f = config.atom_classes;
  const std::size_t b = config.bond_classes;
  // Feed-forward (d -> 2d -> d) plus layer norm.
  const std::size_t tail = (d * 2 * d + 2 * d) + (2 * d * d + d) + 2 * d;
  const std::size_t features = f + b + kWalkLengths;  // one-hot, b - 1 neighbour counts, size, closed walks
  std::size_t total = (features * d + d) + (b * d + d) + (d * d + d);
  total += 2 * p + ((d + 2 * p) * d + d);
  if (config.strategy == Fusion::kCrossAttention) {
    const std::size_t self = 3 * d * d + (d * d + d) + tail;
    const std::size_t cross = d * d + 2 * p * d + (d * d + d) + tail;
    total += p + config.fuse_layers * (self + cross);
  }
  if (config.strategy == Fusion::kVirtualNode) total += (2 * p * d + d) + d;
  total += config.gt_layers * (4 * d * d + 2 * (d * d + d) + 2 * tail);
  total += (d * d + d) + (d * f + f) + (2 * d * d + d) + (d * b + b);
  return total;
}

double init_bound(const std::string& name, int rows, int cols) {
  if (ends_with(name, ".ln.g")) return 1.0;
  if (ends_with(name, ".b")) return 0.0;
  if (ends_with(name, ".w")) return 1.0 / std::sqrt(static_cast<double>(rows));
  // Free vectors (null context, separator, virtual edge).
  return 1.0 / std::sqrt(static_cast<double>(cols));
}

void round_to_float(std::vector<double>& values) {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

DenoiserParams init_params(const DenoiserConfig& config, Rng& rng) {
  std::vector<NamedTensor> tensors;
  for (const auto& [name, shape] : parameter_shapes(config)) {
    Tensor t(shape.first, shape.second);
    const double bound = init_bound(name, shape.first, shape.second);
    if (ends_with(name, ".ln.g")) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (bound > 0.0) {
      for (double& v : t.data) v = (2.0 * uniform01(rng) - 1.0) * bound;
      round_to_float(t.data);
      // Rounding may step just past the bound.
      for (double& v : t.data) v = std::clamp(v, -bound, bound);
    }
    tensors.push_back({name, std::move(t)});
  }
  return DenoiserParams(config, std::move(tensors));
}

int node_feature_width(const DenoiserConfig& config) {
  return config.atom_classes + config.bond_classes + kWalkLengths;
}

Tensor node_features(const MolGraph& g) {
  const int n = g.size();
  const int f = g.atom_classes();
  const int b = g.bond_classes();
  Tensor out(n, f + b + kWalkLengths);
  std::vector<double> adj(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    out(i, g.atom(i)) = 1.0;
    for (int j = 0; j < n; ++j) {
      if (g.bond(i, j) == 0) continue;
      out(i, f + g.bond(i, j) - 1) += 0.25;
      adj[i * n + j] = 1.0;
    }
    out(i, f + b - 1) = n / 10.0;
  }
  // Closed walks of length 3.. (diagonal of A^k), log-compressed.
  std::vector<double> power = adj;
  std::vector<double> next(power.size());
  for (int k = 2; k < 3 + kWalkLengths; ++k) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < n; ++i)
      for (int m = 0; m < n; ++m) {
        const double a = power[i * n + m];
        if (a == 0.0) continue;
        for (int j = 0; j < n; ++j) next[i * n + j] += a * adj[m * n + j];
      }
    power.swap(next);
    if (k >= 3) {
      for (int i = 0; i < n; ++i) out(i, f + b + k - 3) = std::log1p(power[i * n + i]) / 4.0;
    }
  }
  return out;
}

Tensor timestep_features(int t, int steps, int width) {
  Tensor out(1, width);
  const double position = 1000.0 * static_cast<double>(t) / static_cast<double>(steps);
  const int half = width / 2;
  for (int k = 0; k < half; ++k) {
    const double frequency = std::pow(10000.0, -static_cast<double>(k) / std::max(half, 1));
    out.data[2 * k] = std::sin(position * frequency);
    out.data[2 * k + 1] = std::cos(position * frequency);
  }
  if (width % 2 == 1) out.data[width - 1] = static_cast<double>(t) / steps;
  return out;
}

// ---------------------------------------------------------------------------

DenoiserGraph::DenoiserGraph(const DenoiserParams& params, Tape& tape) : params_(params), tape_(tape) {}

Var DenoiserGraph::param(const std::string& name) {
  auto it = leaves_.find(name);
  if (it != leaves_.end()) return it->second;
  const Var v = tape_.leaf(params_.get(name));
  leaves_.emplace(name, v);
  return v;
}

Var DenoiserGraph::feed_forward(const std::string& prefix, Var x) {
  Var hidden = tape_.silu(tape_.add_row(tape_.matmul(x, param(prefix + ".ff1.w")), param(prefix + ".ff1.b")));
  return tape_.add_row(tape_.matmul(hidden, param(prefix + ".ff2.w")), param(prefix + ".ff2.b"));
}

Var DenoiserGraph::multi_head_attention(const std::string& prefix, Var queries, Var memory) {
  const int heads = params_.config().heads;
  const int dk = params_.config().head_width();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Var q = tape_.matmul(queries, param(prefix + ".q.w"));
  Var k = tape_.matmul(memory, param(prefix + ".k.w"));
  Var v = tape_.matmul(memory, param(prefix + ".v.w"));
  std::vector<Var> outputs;
  for (int h = 0; h < heads; ++h) {
    Var qh = tape_.slice_cols(q, h * dk, (h + 1) * dk);
    Var kh = tape_.slice_cols(k, h * dk, (h + 1) * dk);
    Var vh = tape_.slice_cols(v, h * dk, (h + 1) * dk);
    Var weights = tape_.softmax_rows(tape_.scale(tape_.matmul_nt(qh, kh), scale));
    outputs.push_back(tape_.matmul(weights, vh));
  }
  Var joined = tape_.concat_cols(outputs);
  return tape_.add_row(tape_.matmul(joined, param(prefix + ".o.w")), param(prefix + ".o.b"));
}

Var DenoiserGraph::self_attention_block(const std::string& prefix, Var x) {
  Var attended = multi_head_attention(prefix, x, x);
  return tape_.layer_norm(tape_.add(x, feed_forward(prefix, attended)), param(prefix + ".ln.g"),
                          param(prefix + ".ln.b"));
}

Var DenoiserGraph::cross_attention_block(const std::string& prefix, Var x, Var context) {
  if (tape_.value(context).rows == 0) throw UsageError("cross attention: empty context");
  Var attended = multi_head_attention(prefix, x, context);
  return tape_.layer_norm(tape_.add(x, feed_forward(prefix, attended)), param(prefix + ".ln.g"),
                          param(prefix + ".ln.b"));
}

namespace {

std::vector<int> transpose_index(int n) {
  std::vector<int> index(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) index[static_cast<std::size_t>(i) * n + j] = j * n + i;
  }
  return index;
}

}  // namespace

std::pair<Var, Var> DenoiserGraph::graph_transformer_layer(int layer, Var h, Var e, int nodes) {
  const Tensor& edges = tape_.value(e);
  if (edges.rows != nodes * nodes) throw UsageError("graph transformer: edge tensor has wrong row count");
  for (int i = 0; i < nodes; ++i) {
    for (int j = i + 1; j < nodes; ++j) {
      const auto a = edges.row(i * nodes + j);
      const auto b = edges.row(j * nodes + i);
      if (!std::equal(a.begin(), a.end(), b.begin())) {
        throw UsageError("graph transformer: edge features are not symmetric at (" + std::to_string(i) +
                         "," + std::to_string(j) + ")");
      }
    }
  }
  const std::string prefix = "gt" + std::to_string(layer);
  const int heads = params_.config().heads;
  const int dk = params_.config().head_width();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Var q = tape_.matmul(h, param(prefix + ".q.w"));
  Var k = tape_.matmul(h, param(prefix + ".k.w"));
  Var v = tape_.matmul(h, param(prefix + ".v.w"));
  Var edge_proj = tape_.matmul(e, param(prefix + ".e.w"));
  std::vector<Var> node_heads;
  std::vector<Var> edge_heads;
  for (int head = 0; head < heads; ++head) {
    Var qh = tape_.slice_cols(q, head * dk, (head + 1) * dk);
    Var kh = tape_.slice_cols(k, head * dk, (head + 1) * dk);
    Var vh = tape_.slice_cols(v, head * dk, (head + 1) * dk);
    Var eh = tape_.slice_cols(edge_proj, head * dk, (head + 1) * dk);
    Var scores = tape_.reshape(tape_.scale(tape_.matmul_nt(qh, kh), scale), nodes * nodes, 1);
    // Raw edge-aware scores: (q_i . k_j / sqrt(dk)) * (E e_ij).
    Var raw = tape_.scale_rows(eh, scores);
    Var logits = tape_.reshape(tape_.row_sums(raw), nodes, nodes);
    Var weights = tape_.softmax_rows(logits);
    node_heads.push_back(tape_.matmul(weights, vh));
    edge_heads.push_back(raw);
  }
  Var node_update = tape_.add_row(tape_.matmul(tape_.concat_cols(node_heads), param(prefix + ".oh.w")),
                                  param(prefix + ".oh.b"));
  Var edge_update = tape_.add_row(tape_.matmul(tape_.concat_cols(edge_heads), param(prefix + ".oe.w")),
                                  param(prefix + ".oe.b"));
  edge_update = tape_.scale(tape_.add(edge_update, tape_.gather_rows(edge_update, transpose_index(nodes))), 0.5);

  const std::string node_prefix = prefix + ".node";
  const std::string edge_prefix = prefix + ".edge";
  Var h_out = tape_.layer_norm(tape_.add(h, feed_forward(node_prefix, node_update)),
                               param(node_prefix + ".ln.g"), param(node_prefix + ".ln.b"));
  Var e_out = tape_.layer_norm(tape_.add(e, feed_forward(edge_prefix, edge_update)),
                               param(edge_prefix + ".ln.g"), param(edge_prefix + ".ln.b"));
  return {h_out, e_out};
}

Var DenoiserGraph::context_tokens(const ConditionContext& context) {
  const int p = context.dim;
  std::vector<Var> parts;
  const int sep = context.separator_row;
  auto block = [&](int begin, int end) {
    if (end <= begin) return;
    std::vector<double> values(context.tokens.begin() + static_cast<std::ptrdiff_t>(begin) * p,
                               context.tokens.begin() + static_cast<std::ptrdiff_t>(end) * p);
    parts.push_back(tape_.constant(Tensor(end - begin, p, std::move(values))));
  };
  if (sep >= 0) {
    block(0, sep);
    parts.push_back(param("cond.sep"));
    block(sep + 1, context.rows);
  } else {
    block(0, context.rows);
  }
  if (parts.empty()) throw UsageError("cross attention: empty context");
  return tape_.concat_rows(parts);
}

DenoiserGraph::Output DenoiserGraph::forward(const MolGraph& noisy, const ConditionContext& context, int t) {
  const DenoiserConfig& cfg = params_.config();
  if (t < 1 || t > cfg.steps) {
    throw UsageError("denoiser: t=" + std::to_string(t) + " outside [1, " + std::to_string(cfg.steps) + "]");
  }
  if (noisy.atom_classes() != cfg.atom_classes || noisy.bond_classes() != cfg.bond_classes) {
    throw UsageError("denoiser: graph class counts do not match the model");
  }
  if (noisy.size() < 1) throw UsageError("denoiser: empty graph");
  if (!context.is_null()) {
    if (context.strategy != cfg.strategy) {
      throw UsageError("denoiser: context strategy " + std::string(fusion_name(context.strategy)) +
                       " does not match model strategy " + std::string(fusion_name(cfg.strategy)));
    }
    if (context.dim != cfg.protein_dim) throw UsageError("denoiser: context width does not match the model");
  }
  const int n = noisy.size();
  const int d = cfg.width;

  Var atoms = tape_.constant(node_features(noisy));
  Var bonds = tape_.constant(Tensor(n * n, cfg.bond_classes, noisy.one_hot_bonds()));
  Var h = tape_.add_row(tape_.matmul(atoms, param("atom_embed.w")), param("atom_embed.b"));
  Var time = tape_.add_row(tape_.matmul(tape_.constant(timestep_features(t, cfg.steps, d)), param("time.w")),
                           param("time.b"));
  h = tape_.add(h, tape_.gather_rows(time, std::vector<int>(n, 0)));
  Var e = tape_.add_row(tape_.matmul(bonds, param("bond_embed.w")), param("bond_embed.b"));

  int nodes = n;
  if (context.is_null() || context.strategy == Fusion::kConcat) {
    Var pooled = context.is_null() ? param("cond.null")
                                   : tape_.constant(Tensor(1, 2 * cfg.protein_dim, context.pooled));
    const Var joined[] = {h, tape_.gather_rows(pooled, std::vector<int>(n, 0))};
    h = tape_.add_row(tape_.matmul(tape_.concat_cols(joined), param("cond.cat.w")), param("cond.cat.b"));
  } else if (context.strategy == Fusion::kCrossAttention) {
    Var memory = context_tokens(context);
    for (int l = 0; l < cfg.fuse_layers; ++l) {
      h = self_attention_block("fuse" + std::to_string(l) + ".self", h);
      h = cross_attention_block("fuse" + std::to_string(l) + ".cross", h, memory);
    }
  } else {
    Var pooled = tape_.constant(Tensor(1, 2 * cfg.protein_dim, context.pooled));
    Var virtual_node = tape_.add_row(tape_.matmul(pooled, param("cond.vn.w")), param("cond.vn.b"));
    const Var rows[] = {h, virtual_node};
    h = tape_.concat_rows(rows);
    nodes = n + 1;
    const Var table_parts[] = {e, param("cond.vn.edge")};
    Var table = tape_.concat_rows(table_parts);
    std::vector<int> index(static_cast<std::size_t>(nodes) * nodes);
    for (int i = 0; i < nodes; ++i) {
      for (int j = 0; j < nodes; ++j) {
        index[static_cast<std::size_t>(i) * nodes + j] = (i < n && j < n) ? i * n + j : n * n;
      }
    }
    e = tape_.gather_rows(table, std::move(index));
  }

  for (int l = 0; l < cfg.gt_layers; ++l) std::tie(h, e) = graph_transformer_layer(l, h, e, nodes);

  if (nodes != n) {
    h = tape_.slice_rows(h, 0, n);
    std::vector<int> index(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) index[static_cast<std::size_t>(i) * n + j] = i * nodes + j;
    }
    e = tape_.gather_rows(e, std::move(index));
  }

  auto head = [&](const std::string& prefix, Var x) {
    Var hidden = tape_.silu(tape_.add_row(tape_.matmul(x, param(prefix + ".1.w")), param(prefix + ".1.b")));
    return tape_.add_row(tape_.matmul(hidden, param(prefix + ".2.w")), param(prefix + ".2.b"));
  };
  Output out;
  out.n = n;
  out.atom_logits = head("head_x", h);
  std::vector<int> row_of(static_cast<std::size_t>(n) * n);
  std::vector<int> col_of(row_of.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      row_of[static_cast<std::size_t>(i) * n + j] = i;
      col_of[static_cast<std::size_t>(i) * n + j] = j;
    }
  }
  Var endpoints = tape_.add(tape_.gather_rows(h, std::move(row_of)), tape_.gather_rows(h, std::move(col_of)));
  const Var edge_input[] = {e, endpoints};
  Var bond_logits = head("head_e", tape_.concat_cols(edge_input));
  out.bond_logits = tape_.scale(tape_.add(bond_logits, tape_.gather_rows(bond_logits, transpose_index(n))), 0.5);
  return out;
}

PredictedDistributions predict(const DenoiserParams& params, const MolGraph& noisy,
                               const ConditionContext& context, int t) {
  Tape tape(false);
  DenoiserGraph graph(params, tape);
  const auto out = graph.forward(noisy, context, t);
  PredictedDistributions pred;
  pred.n = out.n;
  pred.atom_classes = params.config().atom_classes;
  pred.bond_classes = params.config().bond_classes;
  pred.atoms = tape.value(tape.softmax_rows(out.atom_logits));
  pred.bonds = tape.value(tape.softmax_rows(out.bond_logits));
  for (int i = 0; i < pred.n; ++i) {
    for (int c = 0; c < pred.bond_classes; ++c) pred.bonds(i * pred.n + i, c) = c == 0 ? 1.0 : 0.0;
  }
  return pred;
}

LossAndGradients backward(const DenoiserParams& params, const MolGraph& noisy,
                          const ConditionContext& context, int t, const MolGraph& clean, double lambda) {
  if (clean.size() != noisy.size()) throw UsageError("backward: clean and noisy graphs differ in size");
  Tape tape;
  DenoiserGraph graph(params, tape);
  const auto out = graph.forward(noisy, context, t);
  const int n = out.n;

  Var node_loss = tape.softmax_cross_entropy(out.atom_logits, clean.atoms(), std::vector<double>(n, 1.0));
  std::vector<int> upper;
  std::vector<int> targets;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      upper.push_back(i * n + j);
      targets.push_back(clean.bond(i, j));
    }
  }
  Var total = node_loss;
  if (!upper.empty()) {
    std::vector<double> weights(upper.size(), 2.0 * lambda);
    Var edge_loss = tape.softmax_cross_entropy(tape.gather_rows(out.bond_logits, std::move(upper)),
                                               std::move(targets), std::move(weights));
    total = tape.add(node_loss, edge_loss);
  }
  LossAndGradients result;
  result.loss = tape.value(total).data[0];
  tape.backward(total);
  result.gradients.reserve(params.tensors().size());
  for (const auto& named : params.tensors()) {
    if (graph.uses(named.name)) {
      result.gradients.push_back(tape.gradient(graph.param(named.name)));
    } else {
      result.gradients.emplace_back(named.value.rows, named.value.cols);
    }
  }
  if (!std::isfinite(result.loss)) {
    std::string culprit = "loss";
    for (const auto& named : params.tensors()) {
      for (double v : named.value.data) {
        if (!std::isfinite(v)) {
          culprit = named.name;
          break;
        }
      }
      if (culprit != "loss") break;
    }
    if (culprit == "loss") {
      for (std::size_t k = 0; k < result.gradients.size(); ++k) {
        for (double v : result.gradients[k].data) {
          if (!std::isfinite(v)) {
            culprit = "gradient of " + params.tensors()[k].name;
            break;
          }
        }
        if (culprit != "loss") break;
      }
    }
    throw NumericError("non-finite loss; first non-finite tensor: " + culprit);
  }
  return result;
}

}  // namespace ddtm
