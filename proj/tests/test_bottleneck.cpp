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
#include <vector>

#include "vasb/bottleneck.hpp"
#include "vasb/errors.hpp"
#include "vasb/ndcore/autodiff.hpp"
#include "vasb/ndcore/grad_check.hpp"

namespace vasb {
namespace {

std::vector<FrameClass> voiced_frames(VoiceType v, std::size_t n) {
  return std::vector<FrameClass>(n, FrameClass{v, true});
}

BottleneckConfig config(BottleneckKind kind, std::size_t n_l, double p_g) {
  BottleneckConfig c;
  c.kind = kind;
  c.latent_size = n_l;
  c.p_global = p_g;
  return c;
}

TEST(Rate, ThreeOfSixtyFour) {
  EXPECT_EQ(rate_for_target(3, 64), 0.953125);
  EXPECT_EQ(rate_for_target(8, 64), 0.875);
  EXPECT_EQ(rate_for_target(16, 16), 0.0);
}

TEST(Rate, SurvivalProbability) {
  const double p = survival_probability(3, 64);
  EXPECT_GE(p, 5e-86);
  EXPECT_LE(p, 2e-85);
  // Independent oracle: exp(n_l * log(n_b / n_l)).
  EXPECT_NEAR(std::log(p), 64.0 * std::log(3.0 / 64.0), 1e-9);
  EXPECT_EQ(survival_probability(4, 4), 1.0);
}

TEST(Rate, InvalidSizesRejected) {
  EXPECT_THROW(rate_for_target(0, 64), ConfigError);
  EXPECT_THROW(rate_for_target(65, 64), ConfigError);
  EXPECT_THROW(survival_probability(1, 0), ConfigError);
}

struct MaskCase {
  std::size_t n_b, n_l;
};

class MaskStats : public ::testing::TestWithParam<MaskCase> {};

TEST_P(MaskStats, KeptCountWithinThreeStandardErrors) {
  const auto [n_b, n_l] = GetParam();
  const double r = rate_for_target(n_b, n_l);
  const std::vector<double> rates(1000, r);
  // Per-frame kept count is Binomial(n_l, 1 - r) for both kinds.
  const double se = std::sqrt(n_l * r * (1 - r) / 1e5);
  for (BottleneckKind kind : {BottleneckKind::Rabo, BottleneckKind::Hibo}) {
    nd::Rng rng(nd::derive(n_b * 1000 + n_l, to_string(kind)));
    double kept = 0.0;
    std::size_t suffix_ok = 0;
    for (int block = 0; block < 100; ++block) {
      const nd::Matrix m = kind == BottleneckKind::Rabo ? rabo_mask(rates, n_l, rng)
                                                        : hibo_mask(rates, n_l, rng);
      for (std::size_t t = 0; t < m.rows(); ++t) {
        bool seen_zero = false, ok = true;
        for (std::size_t j = 0; j < n_l; ++j) {
          kept += m(t, j);
          if (m(t, j) == 0.0) seen_zero = true;
          else if (seen_zero) ok = false;
        }
        suffix_ok += ok ? 1 : 0;
      }
    }
    EXPECT_NEAR(kept / 1e5, static_cast<double>(n_b), 3.0 * se) << to_string(kind);
    if (kind == BottleneckKind::Hibo) { EXPECT_EQ(suffix_ok, 100000u); }
  }
}

INSTANTIATE_TEST_SUITE_P(TargetSizes, MaskStats,
                         ::testing::Values(MaskCase{3, 64}, MaskCase{8, 64}, MaskCase{3, 16},
                                           MaskCase{8, 16}));

TEST(Masks, RateZeroKeepsEverythingAndRateOneDropsEverything) {
  nd::Rng rng(1);
  const std::vector<double> rates = {0.0, 1.0};
  for (const nd::Matrix& m : {rabo_mask(rates, 8, rng), hibo_mask(rates, 8, rng)}) {
    for (std::size_t j = 0; j < 8; ++j) {
      EXPECT_EQ(m(0, j), 1.0);
      EXPECT_EQ(m(1, j), 0.0);
    }
  }
}

TEST(Masks, RatesOutsideUnitIntervalRejected) {
  nd::Rng rng(1);
  const std::vector<double> bad = {0.5, 1.5};
  EXPECT_THROW(rabo_mask(bad, 4, rng), ConfigError);
  EXPECT_THROW(hibo_mask(bad, 4, rng), ConfigError);
}

TEST(Plan, FrameRatesFollowVoiceAndVoicing) {
  const BottleneckConfig c = config(BottleneckKind::Rabo, 64, 0.0);
  const std::vector<FrameClass> frames = {{VoiceType::SingingLike, true},
                                          {VoiceType::SpeechLike, true},
                                          {VoiceType::SingingLike, false}};
  EXPECT_EQ(frame_rates(c, frames), (std::vector<double>{0.953125, 0.875, 0.0}));
}

TEST(Plan, UnknownFrameClassRejected) {
  BottleneckConfig c = config(BottleneckKind::Rabo, 16, 0.0);
  c.target_size.erase(VoiceType::SpeechLike);
  EXPECT_THROW(frame_rates(c, voiced_frames(VoiceType::SpeechLike, 2)), ConfigError);
}

TEST(Plan, InvalidConfigRejected) {
  BottleneckConfig c = config(BottleneckKind::Rabo, 16, 1.5);
  nd::Rng rng(1);
  EXPECT_THROW(make_plan(c, voiced_frames(VoiceType::SingingLike, 4), rng), ConfigError);
  c = config(BottleneckKind::Rabo, 2, 0.0);  // n_b = 3 > n_l
  EXPECT_THROW(make_plan(c, voiced_frames(VoiceType::SingingLike, 4), rng), ConfigError);
}

TEST(Plan, NoboKeepsEverythingAndConsumesOneDraw) {
  const BottleneckConfig c = config(BottleneckKind::Nobo, 16, 0.3);
  nd::Rng rng(5), reference(5);
  const DropoutPlan plan = make_plan(c, voiced_frames(VoiceType::SingingLike, 10), rng);
  EXPECT_EQ(plan.mask, nd::Matrix::ones(10, 16));
  EXPECT_EQ(plan.branch, PlanBranch::PerFrame);
  reference.next();
  EXPECT_EQ(rng, reference);
}

TEST(Plan, UnvoicedFramesAreNeverMaskedPerFrame) {
  const BottleneckConfig c = config(BottleneckKind::Rabo, 16, 0.0);
  std::vector<FrameClass> frames(50, FrameClass{VoiceType::SingingLike, false});
  nd::Rng rng(3);
  const DropoutPlan plan = make_plan(c, frames, rng);
  EXPECT_EQ(plan.mask, nd::Matrix::ones(50, 16));
}

TEST(Plan, SameSeedSamePlan) {
  const BottleneckConfig c = config(BottleneckKind::Hibo, 64, 0.2);
  nd::Rng a(77), b(77);
  const auto frames = voiced_frames(VoiceType::SpeechLike, 32);
  for (int i = 0; i < 20; ++i) {
    const DropoutPlan pa = make_plan(c, frames, a), pb = make_plan(c, frames, b);
    EXPECT_EQ(pa.mask, pb.mask);
    EXPECT_EQ(pa.branch, pb.branch);
  }
}

class GloboStats : public ::testing::TestWithParam<double> {};

TEST_P(GloboStats, BranchAndZeroFrequencies) {
  const double p_g = GetParam();
  const BottleneckConfig c = config(BottleneckKind::Rabo, 16, p_g);
  // 32 frames, a third unvoiced: mean rate = (2/3)(1 - 3/16).
  std::vector<FrameClass> frames;
  for (int t = 0; t < 32; ++t) frames.push_back({VoiceType::SingingLike, t % 3 != 0});
  double mean_rate = 0.0;
  for (double r : frame_rates(c, frames)) mean_rate += r / 32.0;

  nd::Rng rng(nd::derive(31, static_cast<std::uint64_t>(p_g * 10)));
  int global = 0, zero = 0;
  for (int i = 0; i < 10000; ++i) {
    const DropoutPlan plan = make_plan(c, frames, rng);
    if (plan.branch == PlanBranch::PerFrame) continue;
    ++global;
    if (plan.branch == PlanBranch::GlobalZero) {
      ++zero;
      EXPECT_EQ(nd::max_abs(plan.mask), 0.0);
    } else {
      EXPECT_EQ(plan.mask, nd::Matrix::ones(32, 16));
    }
  }
  EXPECT_NEAR(global / 1e4, p_g, 0.01);
  EXPECT_NEAR(static_cast<double>(zero) / global, mean_rate, 0.02);
}

INSTANTIATE_TEST_SUITE_P(GlobalProbabilities, GloboStats, ::testing::Values(0.1, 0.2, 0.3));

TEST(Plan, GlobalOneAlwaysTakesGlobalBranch) {
  const BottleneckConfig c = config(BottleneckKind::Hibo, 16, 1.0);
  nd::Rng rng(2);
  for (int i = 0; i < 100; ++i)
    EXPECT_NE(make_plan(c, voiced_frames(VoiceType::SpeechLike, 4), rng).branch,
              PlanBranch::PerFrame);
}

TEST(Apply, MaskedPositionsAreZeroAndGradientVanishesThere) {
  const BottleneckConfig c = config(BottleneckKind::Rabo, 16, 0.0);
  nd::Rng rng(9);
  const DropoutPlan plan = make_plan(c, voiced_frames(VoiceType::SingingLike, 6), rng);
  nd::Matrix latent(6, 16);
  for (double& v : latent.data()) v = rng.normal();
  const nd::Matrix out = apply_bottleneck(latent, plan);
  nd::Tape tape;
  nd::Var x = tape.leaf(latent);
  nd::Matrix target(6, 16);
  tape.backward(nd::mse(apply_bottleneck(x, plan), target));
  const nd::Matrix g = tape.grad(x);
  for (std::size_t i = 0; i < latent.size(); ++i) {
    if (plan.mask[i] == 0.0) {
      EXPECT_EQ(out[i], 0.0);
      EXPECT_EQ(g[i], 0.0);
    } else {
      EXPECT_EQ(out[i], latent[i]);
      EXPECT_NE(g[i], 0.0);
    }
  }
}

class BottleneckGrad : public ::testing::TestWithParam<int> {};

TEST_P(BottleneckGrad, MaskedBottleneckGradient) {
  nd::Rng rng(nd::derive(300, static_cast<std::uint64_t>(GetParam())));
  for (bool rescale : {false, true}) {
    BottleneckConfig c = config(GetParam() % 2 ? BottleneckKind::Hibo : BottleneckKind::Rabo, 16, 0.0);
    const DropoutPlan plan = make_plan(c, voiced_frames(VoiceType::SpeechLike, 5), rng);
    nd::Matrix latent(5, 16), target(5, 16);
    for (double& v : latent.data()) v = rng.normal();
    for (double& v : target.data()) v = rng.normal();
    const double err = nd::grad_check(
        [&](nd::Tape&, nd::Var x) { return nd::mse(apply_bottleneck(x, plan, rescale), target); },
        latent);
    EXPECT_LT(err, 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(SeededPoints, BottleneckGrad, ::testing::Range(0, 10));

TEST(Apply, RescaleKeptScalesSurvivors) {
  const BottleneckConfig c = config(BottleneckKind::Rabo, 16, 0.0);
  nd::Rng rng(4);
  const DropoutPlan plan = make_plan(c, voiced_frames(VoiceType::SpeechLike, 3), rng);
  const nd::Matrix f = bottleneck_factor(plan, true);
  for (std::size_t i = 0; i < f.size(); ++i)
    EXPECT_DOUBLE_EQ(f[i], plan.mask[i] * 2.0);  // 1 / (1 - 0.5)
}

TEST(Apply, ShapeMismatchThrows) {
  const DropoutPlan plan = DropoutPlan::keep_all(4, 16);
  EXPECT_THROW(apply_bottleneck(nd::Matrix(4, 8), plan), DimensionError);
}

TEST(Names, RoundTrip) {
  for (BottleneckKind k : {BottleneckKind::Nobo, BottleneckKind::Rabo, BottleneckKind::Hibo})
    EXPECT_EQ(parse_bottleneck_kind(to_string(k)), k);
  EXPECT_THROW(parse_bottleneck_kind("GLOBO"), ConfigError);
}

}  // namespace
}  // namespace vasb
