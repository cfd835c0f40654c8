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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "vasb/errors.hpp"
#include "vasb/ndcore/adam.hpp"
#include "vasb/ndcore/autodiff.hpp"
#include "vasb/ndcore/grad_check.hpp"
#include "vasb/ndcore/layers.hpp"
#include "vasb/ndcore/matrix.hpp"
#include "vasb/ndcore/rng.hpp"

namespace vasb::nd {
namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

void expect_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_TRUE(a.same_shape(b)) << a.shape_string() << " vs " << b.shape_string();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

// ---------------------------------------------------------------------------
// Rng

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, StateRoundTrip) {
  Rng a(9);
  for (int i = 0; i < 10; ++i) a.next();
  Rng b;
  b.set_state(a.state());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, DeriveSeparatesLabelsAndIndices) {
  EXPECT_NE(derive(1, "init"), derive(1, "steps"));
  EXPECT_NE(derive(1, "init"), derive(2, "init"));
  EXPECT_NE(derive(1, std::uint64_t{0}), derive(1, std::uint64_t{1}));
  EXPECT_EQ(derive(7, "x"), derive(7, "x"));
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, BelowPassesChiSquared) {
  // 10 cells, 1e5 draws; 27.88 is the 0.999 quantile of chi-squared(9).
  Rng rng(11);
  std::vector<double> counts(10, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[rng.below(10)] += 1.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - n / 10.0) * (c - n / 10.0) / (n / 10.0);
  EXPECT_LT(chi2, 27.88);
}

TEST(Rng, BelowRejectsZero) {
  Rng rng(1);
  EXPECT_THROW(rng.below(0), ConfigError);
}

TEST(Rng, BinomialMoments) {
  Rng rng(5);
  const int n = 20000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(rng.binomial(64, 0.953125));
    ASSERT_LE(x, 64.0);
    s += x;
    ss += x * x;
  }
  const double mean = s / n, var = ss / n - mean * mean;
  const double mu = 64 * 0.953125, sigma2 = 64 * 0.953125 * 0.046875;
  EXPECT_NEAR(mean, mu, 4.0 * std::sqrt(sigma2 / n));
  EXPECT_NEAR(var, sigma2, 0.1 * sigma2);
}

TEST(Rng, NormalMoments) {
  Rng rng(8);
  const int n = 50000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    ss += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(ss / n, 1.0, 0.03);
}

// ---------------------------------------------------------------------------
// Matrix

TEST(Matrix, MatmulMatchesNaiveLoops) {
  Rng rng(1);
  const Matrix a = random_matrix(7, 5, rng), b = random_matrix(5, 3, rng);
  expect_near(matmul(a, b), naive_matmul(a, b), 1e-12);
  expect_near(matmul_tn(transpose(a), b), naive_matmul(a, b), 1e-12);
  expect_near(matmul_nt(a, transpose(b)), naive_matmul(a, b), 1e-12);
}

TEST(Matrix, SmallProductByHand) {
  const Matrix a{{1, 2}, {3, 4}}, b{{5, 6}, {7, 8}};
  EXPECT_EQ(matmul(a, b), (Matrix{{19, 22}, {43, 50}}));
}

TEST(Matrix, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
  EXPECT_THROW(hadamard(Matrix(2, 3), Matrix(3, 2)), DimensionError);
  EXPECT_THROW(concat_cols(Matrix(2, 3), Matrix(3, 2)), DimensionError);
  Matrix a(2, 2);
  EXPECT_THROW(a += Matrix(1, 2), DimensionError);
}

TEST(Matrix, ConcatAndReductions) {
  const Matrix a{{1, 2}, {3, 4}}, b{{5}, {-6}};
  EXPECT_EQ(concat_cols(a, b), (Matrix{{1, 2, 5}, {3, 4, -6}}));
  EXPECT_DOUBLE_EQ(sum(a), 10.0);
  EXPECT_DOUBLE_EQ(max_abs(b), 6.0);
  EXPECT_EQ(transpose(a), (Matrix{{1, 3}, {2, 4}}));
  EXPECT_EQ(Matrix::identity(2), (Matrix{{1, 0}, {0, 1}}));
}

// ---------------------------------------------------------------------------
// Autodiff: each op against central differences

class OpGrad : public ::testing::TestWithParam<int> {};

TEST_P(OpGrad, AllOpsWithinTolerance) {
  Rng rng(derive(100, static_cast<std::uint64_t>(GetParam())));
  const Matrix w = random_matrix(4, 3, rng), bias = random_matrix(1, 3, rng);
  const Matrix other = random_matrix(5, 4, rng), target = random_matrix(5, 3, rng);
  const Matrix point = random_matrix(5, 4, rng);
  Matrix factor(5, 4);
  for (double& v : factor.data()) v = rng.bernoulli(0.5) ? 0.0 : 1.0 + rng.uniform();

  const double tol = 1e-4;
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return sum(matmul(x, t.leaf(w))); }, point), tol);
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return mse(matmul(x, t.leaf(w)), target); }, point), tol);
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return mse(add_row(matmul(x, t.leaf(w)), t.leaf(bias)), target); }, point), tol);
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return mse(add_row(t.leaf(target), x), Matrix(5, 3)); }, bias), tol);
  EXPECT_LT(grad_check([&](Tape&, Var x) { return sum(hadamard(relu(x), tanh(x))); }, point), tol);
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return sum(hadamard(x, t.leaf(other))); }, point), tol);
  EXPECT_LT(grad_check([&](Tape&, Var x) { return mse(scale_by(x, factor), other); }, point), tol);
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return mse(concat_cols(x, t.leaf(target)), Matrix(5, 7)); }, point), tol);
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return mse(concat_cols(t.leaf(target), x), Matrix(5, 7)); }, point), tol);
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return mse(matmul(t.leaf(other), x), target); }, w), tol);
}

INSTANTIATE_TEST_SUITE_P(SeededPoints, OpGrad, ::testing::Range(0, 10));

TEST(Autodiff, SharedInputAccumulates) {
  Tape t;
  Var x = t.leaf(Matrix{{2.0}});
  Var y = sum(hadamard(x, x));  // x^2
  t.backward(y);
  EXPECT_DOUBLE_EQ(t.grad(x)[0], 4.0);
}

TEST(Autodiff, ScaleByZeroBlocksGradient) {
  Tape t;
  Var x = t.leaf(Matrix{{1.0, 2.0, 3.0}});
  Var y = sum(scale_by(x, Matrix{{1.0, 0.0, 2.0}}));
  t.backward(y);
  EXPECT_EQ(t.grad(x), (Matrix{{1.0, 0.0, 2.0}}));
}

TEST(Autodiff, BackwardNeedsScalar) {
  Tape t;
  Var x = t.leaf(Matrix(2, 2));
  EXPECT_THROW(t.backward(x), DimensionError);
}

TEST(Autodiff, MseValueMatchesDefinition) {
  const Matrix a{{1, 2}, {3, 4}}, b{{0, 2}, {3, 6}};
  EXPECT_DOUBLE_EQ(mse_value(a, b), (1.0 + 0.0 + 0.0 + 4.0) / 4.0);
}

// ---------------------------------------------------------------------------
// Layers

class LayerGrad : public ::testing::TestWithParam<int> {};

TEST_P(LayerGrad, DenseLayerEveryActivation) {
  Rng rng(derive(200, static_cast<std::uint64_t>(GetParam())));
  const Matrix x = random_matrix(6, 5, rng), target = random_matrix(6, 4, rng);
  for (Activation act : {Activation::Linear, Activation::Relu, Activation::Tanh}) {
    DenseLayer layer = DenseLayer::init(5, 4, act, rng);
    layer.bias = random_matrix(1, 4, rng, 0.1);
    auto wrt_input = [&](Tape& t, Var v) {
      return mse_loss(dense_forward(v, t.leaf(layer.weight), t.leaf(layer.bias), act), target);
    };
    auto wrt_weight = [&](Tape& t, Var v) {
      return mse_loss(dense_forward(t.leaf(x), v, t.leaf(layer.bias), act), target);
    };
    auto wrt_bias = [&](Tape& t, Var v) {
      return mse_loss(dense_forward(t.leaf(x), t.leaf(layer.weight), v, act), target);
    };
    EXPECT_LT(grad_check(wrt_input, x), 1e-4) << to_string(act);
    EXPECT_LT(grad_check(wrt_weight, layer.weight), 1e-4) << to_string(act);
    EXPECT_LT(grad_check(wrt_bias, layer.bias), 1e-4) << to_string(act);
  }
}

INSTANTIATE_TEST_SUITE_P(SeededPoints, LayerGrad, ::testing::Range(0, 10));

TEST(Layers, TapedAndPlainForwardAgree) {
  Rng rng(4);
  const Matrix x = random_matrix(3, 5, rng);
  const DenseLayer layer = DenseLayer::init(5, 2, Activation::Relu, rng);
  Tape t;
  const Var out = dense_forward(t.leaf(x), t.leaf(layer.weight), t.leaf(layer.bias), Activation::Relu);
  EXPECT_EQ(t.value(out), dense_forward(x, layer.weight, layer.bias, Activation::Relu));
}

TEST(Layers, InitBoundsAndZeroBias) {
  Rng rng(2);
  const DenseLayer relu = DenseLayer::init(24, 8, Activation::Relu, rng);
  const DenseLayer lin = DenseLayer::init(24, 8, Activation::Linear, rng);
  EXPECT_LE(max_abs(relu.weight), std::sqrt(6.0 / 24.0));
  EXPECT_LE(max_abs(lin.weight), std::sqrt(3.0 / 24.0));
  EXPECT_EQ(max_abs(relu.bias), 0.0);
}

TEST(Layers, ShapeErrors) {
  EXPECT_THROW(dense_forward(Matrix(2, 3), Matrix(4, 2), Matrix(1, 2), Activation::Linear),
               DimensionError);
  EXPECT_THROW(dense_forward(Matrix(2, 4), Matrix(4, 2), Matrix(1, 3), Activation::Linear),
               DimensionError);
}

// ---------------------------------------------------------------------------
// Adam

TEST(Adam, TwoStepsByHand) {
  std::vector<Parameter> p;
  p.emplace_back("w", Matrix{{1.0}});
  const AdamConfig cfg;
  adam_step(p, {Matrix{{0.5}}}, 1, cfg);
  // m = 0.05, v = 2.5e-4; corrected m = 0.5, v = 0.25.
  double expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(p[0].value[0], expected, 1e-15);
  adam_step(p, {Matrix{{-0.2}}}, 2, cfg);
  const double m = 0.9 * 0.05 + 0.1 * -0.2, v = 0.999 * 2.5e-4 + 0.001 * 0.04;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  expected -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
  EXPECT_NEAR(p[0].value[0], expected, 1e-15);
  EXPECT_NEAR(p[0].moments.m[0], m, 1e-17);
  EXPECT_NEAR(p[0].moments.v[0], v, 1e-18);
}

TEST(Adam, NonFiniteGradientNamesParameterAndLeavesStateUntouched) {
  std::vector<Parameter> p;
  p.emplace_back("encoder.0.weight", Matrix{{1.0, 2.0}});
  p.emplace_back("encoder.0.bias", Matrix{{0.0}});
  const auto before = p[0].value;
  try {
    adam_step(p, {Matrix{{0.1, 0.1}}, Matrix{{std::nan("")}}}, 1, AdamConfig{});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.0.bias"), std::string::npos);
  }
  EXPECT_EQ(p[0].value, before);
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<Parameter> p;
  p.emplace_back("w", Matrix(2, 2));
  EXPECT_THROW(adam_step(p, {Matrix(2, 3)}, 1, AdamConfig{}), DimensionError);
  EXPECT_THROW(adam_step(p, {}, 1, AdamConfig{}), DimensionError);
}

TEST(Adam, MinimisesQuadratic) {
  std::vector<Parameter> p;
  p.emplace_back("w", Matrix{{3.0, -2.0}});
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (long s = 1; s <= 2000; ++s) {
    Matrix g = p[0].value * 2.0;  // d/dw |w|^2
    adam_step(p, {g}, s, cfg);
  }
  EXPECT_LT(max_abs(p[0].value), 1e-2);
}

// ---------------------------------------------------------------------------
// grad_check itself

TEST(GradCheck, RelativeDifferenceFloor) {
  EXPECT_DOUBLE_EQ(relative_difference(1.0, 1.5), 0.5 / 1.5);
  EXPECT_DOUBLE_EQ(relative_difference(0.0, 1e-9), 1e-9 / 1e-6);
}

TEST(GradCheck, DetectsWrongGradient) {
  // The value is 2x but half of it enters through a constant leaf, so the
  // taped gradient is 1 where central differences give 2.
  const Matrix point{{0.3, -0.7}};
  const double err = grad_check(
      [](Tape& t, Var x) {
        const Matrix doubled = t.value(x) * 2.0;
        return sum(add_row(t.leaf(doubled - t.value(x)), x));
      },
      point);
  EXPECT_GT(err, 0.4);
}

}  // namespace
}  // namespace vasb::nd
