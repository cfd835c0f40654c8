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

#include <cmath>
#include <string>
#include <string_view>

#include "vasb/ndcore/autodiff.hpp"
#include "vasb/ndcore/matrix.hpp"
#include "vasb/ndcore/rng.hpp"

namespace vasb::nd {

enum class Activation { Linear, Relu, Tanh };

inline std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

inline Matrix activate(Matrix m, Activation a) {
  switch (a) {
    case Activation::Linear: break;
    case Activation::Relu:
      for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::Tanh:
      for (double& v : m.data()) v = std::tanh(v);
      break;
  }
  return m;
}

inline Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::Relu: return relu(x);
    case Activation::Tanh: return tanh(x);
    case Activation::Linear: break;
  }
  return x;
}

inline void check_dense_shapes(const Matrix& x, const Matrix& w, const Matrix& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols())
    throw DimensionError("dense_forward: x " + x.shape_string() + ", w " + w.shape_string() +
                         ", b " + b.shape_string());
}

/// activation(x·w + b). The plain and taped paths run the same kernels, so
/// their values agree bitwise.
inline Matrix dense_forward(const Matrix& x, const Matrix& w, const Matrix& b, Activation act) {
  check_dense_shapes(x, w, b);
  Matrix out = matmul(x, w);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += b(0, c);
  return activate(std::move(out), act);
}

inline Var dense_forward(Var x, Var w, Var b, Activation act) {
  check_dense_shapes(x.tape->value(x), w.tape->value(w), b.tape->value(b));
  return activate(add_row(matmul(x, w), b), act);
}

inline double mse_loss(const Matrix& pred, const Matrix& target) {
  return mse_value(pred, target);
}

inline Var mse_loss(Var pred, const Matrix& target) { return mse(pred, target); }

/// Weight and bias of one fully connected layer.
struct DenseLayer {
  Matrix weight;  // in × out
  Matrix bias;    // 1 × out
  Activation activation = Activation::Linear;

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }

  /// Uniform(-s, s) weights with s scaled by fan-in; zero bias.
  static DenseLayer init(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer l{Matrix(in, out), Matrix(1, out), act};
    const double gain = act == Activation::Relu ? 6.0 : 3.0;
    const double s = std::sqrt(gain / static_cast<double>(in));
    for (double& v : l.weight.data()) v = rng.uniform(-s, s);
    return l;
  }
};

}  // namespace vasb::nd
