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

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "vasb/errors.hpp"
#include "vasb/ndcore/matrix.hpp"

namespace vasb::nd {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates for one parameter tensor.
struct AdamMoments {
  Matrix m;
  Matrix v;
};

/// A named trainable tensor with its optimizer moments.
struct Parameter {
  std::string name;
  Matrix value;
  AdamMoments moments;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)),
        value(std::move(v)),
        moments{Matrix(value.rows(), value.cols()), Matrix(value.rows(), value.cols())} {}
};

/// One bias-corrected Adam update. `step` is the 1-based count of updates
/// including this one. Throws TrainingError naming the first parameter
/// whose gradient is non-finite, before anything is modified.
inline void adam_step(std::vector<Parameter>& params, const std::vector<Matrix>& grads,
                      long step, const AdamConfig& cfg) {
  if (grads.size() != params.size())
    throw DimensionError("adam_step: " + std::to_string(grads.size()) + " grads for " +
                         std::to_string(params.size()) + " params");
  if (step < 1) throw ConfigError("adam_step: step must be >= 1");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    if (!p.value.same_shape(grads[i]) || !p.value.same_shape(p.moments.m) ||
        !p.value.same_shape(p.moments.v))
      throw DimensionError("adam_step: shape mismatch for parameter '" + p.name + "'");
    if (!grads[i].all_finite())
      throw TrainingError("adam_step: non-finite gradient for parameter '" + p.name + "'");
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const double inv_bc1 = 1.0 / bc1;
  const double inv_bc2 = 1.0 / bc2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const auto n = static_cast<Eigen::Index>(p.value.size());
    Eigen::Map<Eigen::ArrayXd> value(p.value.data().data(), n);
    Eigen::Map<Eigen::ArrayXd> m(p.moments.m.data().data(), n);
    Eigen::Map<Eigen::ArrayXd> v(p.moments.v.data().data(), n);
    Eigen::Map<const Eigen::ArrayXd> g(grads[i].data().data(), n);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    value -= cfg.lr * (m * inv_bc1) / ((v * inv_bc2).sqrt() + cfg.eps);
  }
}

}  // namespace vasb::nd
