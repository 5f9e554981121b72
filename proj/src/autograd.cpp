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

#include "ddtm/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddtm/error.hpp"

namespace ddtm {

Tensor::Tensor(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != static_cast<std::size_t>(r) * c) throw UsageError("tensor: data size does not match shape");
}

namespace {

void require(bool condition, const char* op, const char* what) {
  if (!condition) throw UsageError(std::string(op) + ": " + what);
}

}  // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> backward) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = requires_grad;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::leaf(const Tensor& value) {
  Node node;
  node.external = &value;
  node.requires_grad = track_;
  nodes_.push_back(std::move(node));
  return {static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id).value(); }

Tensor Tape::gradient(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (node.grad.size() == 0) return Tensor(node.value().rows, node.value().cols);
  return node.grad;
}

Tensor& Tape::accumulate(Var v) {
  Node& node = nodes_[v.id];
  if (node.grad.size() == 0) node.grad = Tensor(node.value().rows, node.value().cols);
  return node.grad;
}

void Tape::backward(Var root) {
  const Tensor& r = value(root);
  require(r.rows == 1 && r.cols == 1, "backward", "root must be 1 x 1");
  accumulate(root).data[0] += 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward || node.grad.size() == 0) continue;
    node.backward(*this);
  }
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.cols == B.rows, "matmul", "inner dimensions differ");
  const int m = A.rows, k = A.cols, n = B.cols;
  Tensor out(m, n);
  for (int i = 0; i < m; ++i) {
    double* o = &out.data[static_cast<std::size_t>(i) * n];
    for (int l = 0; l < k; ++l) {
      const double a_il = A.data[static_cast<std::size_t>(i) * k + l];
      if (a_il == 0.0) continue;
      const double* brow = &B.data[static_cast<std::size_t>(l) * n];
      for (int j = 0; j < n; ++j) o[j] += a_il * brow[j];
    }
  }
  const bool grad = tracks(a) || tracks(b);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, b, out_v, m, k, n](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      const Tensor& A = t.value(a);
      const Tensor& B = t.value(b);
      if (t.tracks(a)) {
        Tensor& gA = t.accumulate(a);
        for (int i = 0; i < m; ++i) {
          const double* g = &G.data[static_cast<std::size_t>(i) * n];
          for (int l = 0; l < k; ++l) {
            const double* brow = &B.data[static_cast<std::size_t>(l) * n];
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += g[j] * brow[j];
            gA.data[static_cast<std::size_t>(i) * k + l] += s;
          }
        }
      }
      if (t.tracks(b)) {
        Tensor& gB = t.accumulate(b);
        for (int i = 0; i < m; ++i) {
          const double* g = &G.data[static_cast<std::size_t>(i) * n];
          for (int l = 0; l < k; ++l) {
            const double a_il = A.data[static_cast<std::size_t>(i) * k + l];
            if (a_il == 0.0) continue;
            double* gb = &gB.data[static_cast<std::size_t>(l) * n];
            for (int j = 0; j < n; ++j) gb[j] += a_il * g[j];
          }
        }
      }
    };
  }
  return out_v;
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.cols == B.cols, "matmul_nt", "inner dimensions differ");
  const int m = A.rows, k = A.cols, n = B.rows;
  Tensor out(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int l = 0; l < k; ++l) s += A.data[static_cast<std::size_t>(i) * k + l] * B.data[static_cast<std::size_t>(j) * k + l];
      out.data[static_cast<std::size_t>(i) * n + j] = s;
    }
  }
  const bool grad = tracks(a) || tracks(b);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, b, out_v, m, k, n](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      const Tensor& A = t.value(a);
      const Tensor& B = t.value(b);
      if (t.tracks(a)) {
        Tensor& gA = t.accumulate(a);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            const double g = G.data[static_cast<std::size_t>(i) * n + j];
            for (int l = 0; l < k; ++l) gA.data[static_cast<std::size_t>(i) * k + l] += g * B.data[static_cast<std::size_t>(j) * k + l];
          }
        }
      }
      if (t.tracks(b)) {
        Tensor& gB = t.accumulate(b);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            const double g = G.data[static_cast<std::size_t>(i) * n + j];
            for (int l = 0; l < k; ++l) gB.data[static_cast<std::size_t>(j) * k + l] += g * A.data[static_cast<std::size_t>(i) * k + l];
          }
        }
      }
    };
  }
  return out_v;
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.rows == B.rows && A.cols == B.cols, "add", "shape mismatch");
  Tensor out = A;
  for (std::size_t p = 0; p < out.size(); ++p) out.data[p] += B.data[p];
  const bool grad = tracks(a) || tracks(b);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, b, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      for (Var v : {a, b}) {
        if (!t.tracks(v)) continue;
        Tensor& g = t.accumulate(v);
        for (std::size_t p = 0; p < g.size(); ++p) g.data[p] += G.data[p];
      }
    };
  }
  return out_v;
}

Var Tape::add_row(Var a, Var row) {
  const Tensor& A = value(a);
  const Tensor& R = value(row);
  require(R.rows == 1 && R.cols == A.cols, "add_row", "row shape mismatch");
  Tensor out = A;
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) out(i, j) += R.data[j];
  }
  const bool grad = tracks(a) || tracks(row);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, row, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      if (t.tracks(a)) {
        Tensor& g = t.accumulate(a);
        for (std::size_t p = 0; p < g.size(); ++p) g.data[p] += G.data[p];
      }
      if (t.tracks(row)) {
        Tensor& g = t.accumulate(row);
        for (int i = 0; i < G.rows; ++i) {
          for (int j = 0; j < G.cols; ++j) g.data[j] += G(i, j);
        }
      }
    };
  }
  return out_v;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.rows == B.rows && A.cols == B.cols, "mul", "shape mismatch");
  Tensor out = A;
  for (std::size_t p = 0; p < out.size(); ++p) out.data[p] *= B.data[p];
  const bool grad = tracks(a) || tracks(b);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, b, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      if (t.tracks(a)) {
        const Tensor& B = t.value(b);
        Tensor& g = t.accumulate(a);
        for (std::size_t p = 0; p < g.size(); ++p) g.data[p] += G.data[p] * B.data[p];
      }
      if (t.tracks(b)) {
        const Tensor& A = t.value(a);
        Tensor& g = t.accumulate(b);
        for (std::size_t p = 0; p < g.size(); ++p) g.data[p] += G.data[p] * A.data[p];
      }
    };
  }
  return out_v;
}

Var Tape::scale(Var a, double s) {
  Tensor out = value(a);
  for (double& v : out.data) v *= s;
  const bool grad = tracks(a);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, s, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      Tensor& g = t.accumulate(a);
      for (std::size_t p = 0; p < g.size(); ++p) g.data[p] += s * G.data[p];
    };
  }
  return out_v;
}

Var Tape::scale_rows(Var a, Var s) {
  const Tensor& A = value(a);
  const Tensor& S = value(s);
  require(S.rows == A.rows && S.cols == 1, "scale_rows", "scale must be rows x 1");
  Tensor out = A;
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) out(i, j) *= S.data[i];
  }
  const bool grad = tracks(a) || tracks(s);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, s, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      const Tensor& A = t.value(a);
      const Tensor& S = t.value(s);
      if (t.tracks(a)) {
        Tensor& g = t.accumulate(a);
        for (int i = 0; i < A.rows; ++i) {
          for (int j = 0; j < A.cols; ++j) g(i, j) += G(i, j) * S.data[i];
        }
      }
      if (t.tracks(s)) {
        Tensor& g = t.accumulate(s);
        for (int i = 0; i < A.rows; ++i) {
          double acc = 0.0;
          for (int j = 0; j < A.cols; ++j) acc += G(i, j) * A(i, j);
          g.data[i] += acc;
        }
      }
    };
  }
  return out_v;
}

Var Tape::row_sums(Var a) {
  const Tensor& A = value(a);
  Tensor out(A.rows, 1);
  for (int i = 0; i < A.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < A.cols; ++j) acc += A(i, j);
    out.data[i] = acc;
  }
  const bool grad = tracks(a);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      Tensor& g = t.accumulate(a);
      for (int i = 0; i < g.rows; ++i) {
        for (int j = 0; j < g.cols; ++j) g(i, j) += G.data[i];
      }
    };
  }
  return out_v;
}

Var Tape::silu(Var a) {
  Tensor out = value(a);
  for (double& v : out.data) v = v / (1.0 + std::exp(-v));
  const bool grad = tracks(a);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      const Tensor& X = t.value(a);
      Tensor& g = t.accumulate(a);
      for (std::size_t p = 0; p < g.size(); ++p) {
        const double x = X.data[p];
        const double sig = 1.0 / (1.0 + std::exp(-x));
        g.data[p] += G.data[p] * sig * (1.0 + x * (1.0 - sig));
      }
    };
  }
  return out_v;
}

Var Tape::softmax_rows(Var a) {
  Tensor out = value(a);
  for (int i = 0; i < out.rows; ++i) {
    double* r = &out.data[static_cast<std::size_t>(i) * out.cols];
    const double hi = *std::max_element(r, r + out.cols);
    double z = 0.0;
    for (int j = 0; j < out.cols; ++j) z += (r[j] = std::exp(r[j] - hi));
    for (int j = 0; j < out.cols; ++j) r[j] /= z;
  }
  const bool grad = tracks(a);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      const Tensor& Y = t.value(out_v);
      Tensor& g = t.accumulate(a);
      for (int i = 0; i < Y.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < Y.cols; ++j) dot += G(i, j) * Y(i, j);
        for (int j = 0; j < Y.cols; ++j) g(i, j) += Y(i, j) * (G(i, j) - dot);
      }
    };
  }
  return out_v;
}

Var Tape::layer_norm(Var a, Var gain, Var shift, double eps) {
  const Tensor& X = value(a);
  require(value(gain).cols == X.cols && value(shift).cols == X.cols, "layer_norm", "parameter width mismatch");
  const int m = X.rows, n = X.cols;
  Tensor normalized(m, n);
  std::vector<double> inv_std(m);
  for (int i = 0; i < m; ++i) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += X(i, j);
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= n;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) normalized(i, j) = (X(i, j) - mean) * inv_std[i];
  }
  Tensor out(m, n);
  const Tensor& gn = value(gain);
  const Tensor& sh = value(shift);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out(i, j) = gn.data[j] * normalized(i, j) + sh.data[j];
  }
  const bool grad = tracks(a) || tracks(gain) || tracks(shift);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, gain, shift, out_v, m, n, normalized = std::move(normalized),
                                 inv_std = std::move(inv_std)](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      const Tensor& gn = t.value(gain);
      if (t.tracks(gain)) {
        Tensor& g = t.accumulate(gain);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) g.data[j] += G(i, j) * normalized(i, j);
        }
      }
      if (t.tracks(shift)) {
        Tensor& g = t.accumulate(shift);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) g.data[j] += G(i, j);
        }
      }
      if (t.tracks(a)) {
        Tensor& g = t.accumulate(a);
        std::vector<double> dxhat(n);
        for (int i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (int j = 0; j < n; ++j) {
            dxhat[j] = G(i, j) * gn.data[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * normalized(i, j);
          }
          mean_d /= n;
          mean_dx /= n;
          for (int j = 0; j < n; ++j) {
            g(i, j) += inv_std[i] * (dxhat[j] - mean_d - normalized(i, j) * mean_dx);
          }
        }
      }
    };
  }
  return out_v;
}

Var Tape::slice_cols(Var a, int begin, int end) {
  const Tensor& A = value(a);
  require(0 <= begin && begin <= end && end <= A.cols, "slice_cols", "range out of bounds");
  const int w = end - begin;
  Tensor out(A.rows, w);
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < w; ++j) out(i, j) = A(i, begin + j);
  }
  const bool grad = tracks(a);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, begin, w, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      Tensor& g = t.accumulate(a);
      for (int i = 0; i < G.rows; ++i) {
        for (int j = 0; j < w; ++j) g(i, begin + j) += G(i, j);
      }
    };
  }
  return out_v;
}

Var Tape::slice_rows(Var a, int begin, int end) {
  const Tensor& A = value(a);
  require(0 <= begin && begin <= end && end <= A.rows, "slice_rows", "range out of bounds");
  Tensor out(end - begin, A.cols,
             std::vector<double>(A.data.begin() + static_cast<std::ptrdiff_t>(begin) * A.cols,
                                 A.data.begin() + static_cast<std::ptrdiff_t>(end) * A.cols));
  const bool grad = tracks(a);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, begin, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      Tensor& g = t.accumulate(a);
      const std::size_t offset = static_cast<std::size_t>(begin) * g.cols;
      for (std::size_t p = 0; p < G.size(); ++p) g.data[offset + p] += G.data[p];
    };
  }
  return out_v;
}

Var Tape::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const int m = value(parts[0]).rows;
  int total = 0;
  bool grad = false;
  for (Var p : parts) {
    require(value(p).rows == m, "concat_cols", "row counts differ");
    total += value(p).cols;
    grad |= tracks(p);
  }
  Tensor out(m, total);
  int offset = 0;
  for (Var p : parts) {
    const Tensor& P = value(p);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < P.cols; ++j) out(i, offset + j) = P(i, j);
    }
    offset += P.cols;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [inputs, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      int offset = 0;
      for (Var p : inputs) {
        const int w = t.value(p).cols;
        if (t.tracks(p)) {
          Tensor& g = t.accumulate(p);
          for (int i = 0; i < G.rows; ++i) {
            for (int j = 0; j < w; ++j) g(i, j) += G(i, offset + j);
          }
        }
        offset += w;
      }
    };
  }
  return out_v;
}

Var Tape::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const int n = value(parts[0]).cols;
  int total = 0;
  bool grad = false;
  for (Var p : parts) {
    require(value(p).cols == n, "concat_rows", "column counts differ");
    total += value(p).rows;
    grad |= tracks(p);
  }
  Tensor out(total, n);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& P = value(p);
    std::copy(P.data.begin(), P.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += P.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [inputs, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      std::size_t offset = 0;
      for (Var p : inputs) {
        const std::size_t size = t.value(p).size();
        if (t.tracks(p)) {
          Tensor& g = t.accumulate(p);
          for (std::size_t q = 0; q < size; ++q) g.data[q] += G.data[offset + q];
        }
        offset += size;
      }
    };
  }
  return out_v;
}

Var Tape::gather_rows(Var a, std::vector<int> index) {
  const Tensor& A = value(a);
  Tensor out(static_cast<int>(index.size()), A.cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    require(index[r] >= 0 && index[r] < A.rows, "gather_rows", "index out of range");
    std::copy_n(A.data.begin() + static_cast<std::ptrdiff_t>(index[r]) * A.cols, A.cols,
                out.data.begin() + static_cast<std::ptrdiff_t>(r) * A.cols);
  }
  const bool grad = tracks(a);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, index = std::move(index), out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      Tensor& g = t.accumulate(a);
      for (std::size_t r = 0; r < index.size(); ++r) {
        for (int j = 0; j < G.cols; ++j) g(index[r], j) += G(static_cast<int>(r), j);
      }
    };
  }
  return out_v;
}

Var Tape::reshape(Var a, int rows, int cols) {
  const Tensor& A = value(a);
  require(static_cast<std::size_t>(rows) * cols == A.size(), "reshape", "element count differs");
  Tensor out(rows, cols, A.data);
  const bool grad = tracks(a);
  Var out_v = push(std::move(out), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [a, out_v](Tape& t) {
      const Tensor& G = t.grad_of(out_v);
      Tensor& g = t.accumulate(a);
      for (std::size_t p = 0; p < g.size(); ++p) g.data[p] += G.data[p];
    };
  }
  return out_v;
}

Var Tape::softmax_cross_entropy(Var logits, std::vector<int> targets, std::vector<double> weights,
                                double floor) {
  const Tensor& L = value(logits);
  require(static_cast<int>(targets.size()) == L.rows && weights.size() == targets.size(),
          "softmax_cross_entropy", "one target and weight per row required");
  Tensor probs(L.rows, L.cols);
  double loss = 0.0;
  for (int i = 0; i < L.rows; ++i) {
    require(targets[i] >= 0 && targets[i] < L.cols, "softmax_cross_entropy", "target out of range");
    const auto r = L.row(i);
    const double hi = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (int j = 0; j < L.cols; ++j) z += (probs(i, j) = std::exp(r[j] - hi));
    for (int j = 0; j < L.cols; ++j) probs(i, j) /= z;
    loss -= weights[i] * std::log(std::max(probs(i, targets[i]), floor));
  }
  const bool grad = tracks(logits);
  Var out_v = push(Tensor(1, 1, loss), grad, nullptr);
  if (grad) {
    nodes_[out_v.id].backward = [logits, out_v, probs = std::move(probs), targets = std::move(targets),
                                 weights = std::move(weights), floor](Tape& t) {
      const double G = t.grad_of(out_v).data[0];
      Tensor& g = t.accumulate(logits);
      for (int i = 0; i < probs.rows; ++i) {
        if (probs(i, targets[i]) <= floor) continue;
        for (int j = 0; j < probs.cols; ++j) {
          g(i, j) += G * weights[i] * (probs(i, j) - (j == targets[i] ? 1.0 : 0.0));
        }
      }
    };
  }
  return out_v;
}

}  // namespace ddtm
