// Copyright 2026 The vasb Authors. All Rights Reserved.
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

// Reverse-mode differentiation over a linear tape.
//
// Nodes are appended in evaluation order, so the tape is already a
// topological order and backward() is a single reverse sweep. Only the
// operations the auto-encoder needs are provided.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vasb/ndcore/matrix.hpp"

namespace vasb::nd {

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

enum class OpKind {
  Leaf,
  MatMul,
  AddRow,
  Relu,
  Tanh,
  Hadamard,
  ScaleBy,  // elementwise product with a constant matrix
  ConcatCols,
  Mse,
  Sum,
};

struct DiffNode {
  Matrix value;
  Matrix grad;  // empty until backward() reaches the node
  OpKind op = OpKind::Leaf;
  std::array<std::size_t, 2> inputs{};
  Matrix aux;  // ScaleBy factor or Mse target
};

class Tape {
 public:
  Tape() { nodes_.reserve(64); }

  Var leaf(Matrix value) { return push({std::move(value), {}, OpKind::Leaf, {}, {}}); }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }

  /// Gradient of the last backward() target w.r.t. v; zeros if v did not
  /// contribute.
  Matrix grad(Var v) const {
    const DiffNode& n = nodes_.at(v.id);
    if (n.grad.empty() && !n.value.empty()) return Matrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  const DiffNode& node(Var v) const { return nodes_.at(v.id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var push(DiffNode n) {
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  void backward(Var target) {
    DiffNode& t = nodes_.at(target.id);
    if (t.value.size() != 1)
      throw DimensionError("backward: target must be scalar, got " + t.value.shape_string());
    for (auto& n : nodes_) n.grad = Matrix();
    t.grad = Matrix(1, 1, 1.0);
    for (std::size_t i = target.id + 1; i-- > 0;) {
      DiffNode& n = nodes_[i];
      if (n.grad.empty()) continue;
      propagate(n);
    }
  }

 private:
  void accumulate(std::size_t id, const Matrix& g) {
    DiffNode& n = nodes_[id];
    if (n.grad.empty())
      n.grad = g;
    else
      n.grad += g;
  }

  void propagate(const DiffNode& n) {
    const auto [a, b] = n.inputs;
    switch (n.op) {
      case OpKind::Leaf:
        break;
      case OpKind::MatMul:
        accumulate(a, matmul_nt(n.grad, nodes_[b].value));
        accumulate(b, matmul_tn(nodes_[a].value, n.grad));
        break;
      case OpKind::AddRow: {
        accumulate(a, n.grad);
        Matrix gb(1, n.grad.cols());
        for (std::size_t r = 0; r < n.grad.rows(); ++r)
          for (std::size_t c = 0; c < n.grad.cols(); ++c) gb(0, c) += n.grad(r, c);
        accumulate(b, gb);
        break;
      }
      case OpKind::Relu: {
        Matrix g = n.grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (nodes_[a].value[i] <= 0.0) g[i] = 0.0;
        accumulate(a, g);
        break;
      }
      case OpKind::Tanh: {
        Matrix g = n.grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - n.value[i] * n.value[i];
        accumulate(a, g);
        break;
      }
      case OpKind::Hadamard:
        accumulate(a, hadamard(n.grad, nodes_[b].value));
        accumulate(b, hadamard(n.grad, nodes_[a].value));
        break;
      case OpKind::ScaleBy:
        accumulate(a, hadamard(n.grad, n.aux));
        break;
      case OpKind::ConcatCols: {
        const Matrix& va = nodes_[a].value;
        const Matrix& vb = nodes_[b].value;
        Matrix ga(va.rows(), va.cols()), gb(vb.rows(), vb.cols());
        for (std::size_t r = 0; r < n.grad.rows(); ++r) {
          for (std::size_t c = 0; c < va.cols(); ++c) ga(r, c) = n.grad(r, c);
          for (std::size_t c = 0; c < vb.cols(); ++c) gb(r, c) = n.grad(r, va.cols() + c);
        }
        accumulate(a, ga);
        accumulate(b, gb);
        break;
      }
      case OpKind::Mse: {
        const Matrix& p = nodes_[a].value;
        Matrix g(p.rows(), p.cols());
        const double scale = 2.0 * n.grad[0] / static_cast<double>(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) g[i] = scale * (p[i] - n.aux[i]);
        accumulate(a, g);
        break;
      }
      case OpKind::Sum: {
        const Matrix& p = nodes_[a].value;
        accumulate(a, Matrix(p.rows(), p.cols(), n.grad[0]));
        break;
      }
    }
  }

  std::vector<DiffNode> nodes_;
};

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  return t.push({matmul(t.value(a), t.value(b)), {}, OpKind::MatMul, {a.id, b.id}, {}});
}

/// x + 1·bias, bias is a 1×cols row broadcast over rows.
inline Var add_row(Var x, Var bias) {
  Tape& t = *x.tape;
  const Matrix& xv = t.value(x);
  const Matrix& bv = t.value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols())
    throw DimensionError("add_row: " + xv.shape_string() + " + " + bv.shape_string());
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
  return t.push({std::move(out), {}, OpKind::AddRow, {x.id, bias.id}, {}});
}

inline Var relu(Var x) {
  Tape& t = *x.tape;
  Matrix out = t.value(x);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return t.push({std::move(out), {}, OpKind::Relu, {x.id, 0}, {}});
}

inline Var tanh(Var x) {
  Tape& t = *x.tape;
  Matrix out = t.value(x);
  for (double& v : out.data()) v = std::tanh(v);
  return t.push({std::move(out), {}, OpKind::Tanh, {x.id, 0}, {}});
}

inline Var hadamard(Var a, Var b) {
  Tape& t = *a.tape;
  return t.push({hadamard(t.value(a), t.value(b)), {}, OpKind::Hadamard, {a.id, b.id}, {}});
}

inline Var scale_by(Var x, Matrix factor) {
  Tape& t = *x.tape;
  Matrix out = hadamard(t.value(x), factor);
  return t.push({std::move(out), {}, OpKind::ScaleBy, {x.id, 0}, std::move(factor)});
}

inline Var concat_cols(Var a, Var b) {
  Tape& t = *a.tape;
  return t.push({concat_cols(t.value(a), t.value(b)), {}, OpKind::ConcatCols, {a.id, b.id}, {}});
}

inline Var sum(Var x) {
  Tape& t = *x.tape;
  return t.push({Matrix(1, 1, sum(t.value(x))), {}, OpKind::Sum, {x.id, 0}, {}});
}

double mse_value(const Matrix& pred, const Matrix& target);

inline Var mse(Var pred, Matrix target) {
  Tape& t = *pred.tape;
  const double v = mse_value(t.value(pred), target);
  return t.push({Matrix(1, 1, v), {}, OpKind::Mse, {pred.id, 0}, std::move(target)});
}

/// Mean of squared element differences.
inline double mse_value(const Matrix& pred, const Matrix& target) {
  if (!pred.same_shape(target))
    throw DimensionError("mse_loss: " + pred.shape_string() + " vs " + target.shape_string());
  if (pred.empty()) throw DimensionError("mse_loss: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

}  // namespace vasb::nd
