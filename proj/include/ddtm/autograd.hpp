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

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ddtm {

/// Dense row-major matrix of doubles. Vectors are 1 x n.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}
  Tensor(int r, int c, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }

  bool operator==(const Tensor&) const = default;
};

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Reverse-mode automatic differentiation over Tensor-valued nodes. A tape is
/// single-use: record a forward pass, call backward once, read gradients.
class Tape {
 public:
  /// With `track_gradients` false, leaves are plain constants and no backward
  /// closures are recorded.
  explicit Tape(bool track_gradients = true) : track_(track_gradients) {}

  /// Node with no gradient.
  Var constant(Tensor value);
  /// Leaf that accumulates a gradient. The referenced tensor must outlive the tape.
  Var leaf(const Tensor& value);

  const Tensor& value(Var v) const;
  /// Gradient of the backward root with respect to v (zeros if v was unreached).
  Tensor gradient(Var v) const;

  /// Seeds d(root)/d(root) = 1 for a 1 x 1 root and propagates.
  void backward(Var root);

  // Linear algebra.
  Var matmul(Var a, Var b);     // (m x k)(k x n)
  Var matmul_nt(Var a, Var b);  // (m x k)(n x k)^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1 x n row over every row of a
  Var mul(Var a, Var b);        // elementwise
  Var scale(Var a, double s);
  Var scale_rows(Var a, Var s);  // row i of a times s(i, 0)
  Var row_sums(Var a);           // m x 1

  // Nonlinearities.
  Var silu(Var a);
  Var softmax_rows(Var a);
  Var layer_norm(Var a, Var gain, Var shift, double eps = 1e-5);

  // Shape manipulation.
  Var slice_cols(Var a, int begin, int end);
  Var slice_rows(Var a, int begin, int end);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var gather_rows(Var a, std::vector<int> index);
  Var reshape(Var a, int rows, int cols);

  /// sum_i weight[i] * -log(max(softmax(logits)_i[target[i]], floor)), as a 1 x 1 node.
  Var softmax_cross_entropy(Var logits, std::vector<int> targets, std::vector<double> weights,
                            double floor = 1e-12);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backward;

    const Tensor& value() const { return external ? *external : owned; }
  };

  Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> backward);
  bool tracks(Var v) const { return nodes_[v.id].requires_grad; }
  const Tensor& grad_of(Var v) const { return nodes_[v.id].grad; }
  Tensor& accumulate(Var v);

  std::vector<Node> nodes_;
  bool track_ = true;
};

}  // namespace ddtm
