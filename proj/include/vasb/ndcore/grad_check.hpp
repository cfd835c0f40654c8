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

#include <algorithm>
#include <cmath>

#include "vasb/ndcore/autodiff.hpp"

namespace vasb::nd {

/// Relative difference used by grad_check: |a - b| / max(|a|, |b|, floor).
/// The floor keeps coordinates whose true gradient is ~0 from reporting
/// rounding noise as a large relative error.
inline double relative_difference(double a, double b, double floor = 1e-6) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

/// Compares the taped gradient of the scalar `f(tape, x)` at `point` with
/// central differences (f(x+h) - f(x-h)) / 2h and returns the largest
/// relative difference over all coordinates.
template <class F>
double grad_check(F&& f, const Matrix& point, double h = 1e-4) {
  Matrix analytic;
  {
    Tape tape;
    Var x = tape.leaf(point);
    Var y = f(tape, x);
    tape.backward(y);
    analytic = tape.grad(x);
  }
  auto eval = [&](const Matrix& p) {
    Tape tape;
    Var x = tape.leaf(p);
    return tape.value(f(tape, x))[0];
  };
  double worst = 0.0;
  Matrix probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + h;
    const double up = eval(probe);
    probe[i] = point[i] - h;
    const double down = eval(probe);
    probe[i] = point[i];
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, relative_difference(analytic[i], numeric));
  }
  return worst;
}

}  // namespace vasb::nd
