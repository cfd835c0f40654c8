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

// Dropout-based information bottleneck on the latent code.
//
// A target bottleneck size n_b out of n_l latent features is realised with
// dropout at rate r = 1 - n_b / n_l. Three masking schemes are provided:
//
//   RABO  independent per-feature, per-frame dropout at the frame's rate.
//   HIBO  per frame, k ~ Binomial(n_l, r) features are zeroed, always the
//         highest-indexed ones first (feature n_l-1 is dropped first).
//   GLOBO per sample, the frame-averaged rate decides whether the whole
//         code is kept or zeroed. With probability p_g a training sample
//         uses GLOBO instead of RABO/HIBO.
//
// NOBO is the no-dropout baseline. Unvoiced frames always get rate 0.

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vasb/errors.hpp"
#include "vasb/ndcore/autodiff.hpp"
#include "vasb/ndcore/matrix.hpp"
#include "vasb/ndcore/rng.hpp"
#include "vasb/voice.hpp"

namespace vasb {

enum class BottleneckKind { Nobo, Rabo, Hibo };

inline std::string_view to_string(BottleneckKind k) noexcept {
  switch (k) {
    case BottleneckKind::Nobo: return "NOBO";
    case BottleneckKind::Rabo: return "RABO";
    case BottleneckKind::Hibo: return "HIBO";
  }
  return "?";
}

inline BottleneckKind parse_bottleneck_kind(std::string_view s) {
  if (s == "NOBO" || s == "nobo") return BottleneckKind::Nobo;
  if (s == "RABO" || s == "rabo") return BottleneckKind::Rabo;
  if (s == "HIBO" || s == "hibo") return BottleneckKind::Hibo;
  throw ConfigError("unknown bottleneck kind '" + std::string(s) + "'");
}

struct BottleneckConfig {
  BottleneckKind kind = BottleneckKind::Rabo;
  std::size_t latent_size = 16;
  std::map<VoiceType, std::size_t> target_size = {{VoiceType::SpeechLike, 8},
                                                  {VoiceType::SingingLike, 3}};
  double p_global = 0.1;
  bool rescale_kept = false;

  void validate() const {
    if (latent_size == 0) throw ConfigError("bottleneck.latent_size: must be > 0");
    for (const auto& [voice, nb] : target_size) {
      if (nb == 0 || nb > latent_size)
        throw ConfigError("bottleneck.target_size." + std::string(to_string(voice)) +
                          ": need 0 < n_b <= n_l (n_b=" + std::to_string(nb) +
                          ", n_l=" + std::to_string(latent_size) + ")");
    }
    if (!(p_global >= 0.0 && p_global <= 1.0))
      throw ConfigError("bottleneck.p_global: must lie in [0, 1]");
  }

  friend bool operator==(const BottleneckConfig&, const BottleneckConfig&) = default;
};

enum class PlanBranch { PerFrame, GlobalKeep, GlobalZero };

inline std::string_view to_string(PlanBranch b) noexcept {
  switch (b) {
    case PlanBranch::PerFrame: return "per_frame";
    case PlanBranch::GlobalKeep: return "global_keep";
    case PlanBranch::GlobalZero: return "global_zero";
  }
  return "?";
}

/// Per-frame rates, the branch taken and the realised frames × n_l mask.
struct DropoutPlan {
  std::vector<double> rates;
  PlanBranch branch = PlanBranch::PerFrame;
  nd::Matrix mask;

  /// Full latent, no dropout: the inference-time plan.
  static DropoutPlan keep_all(std::size_t frames, std::size_t latent_size) {
    return {std::vector<double>(frames, 0.0), PlanBranch::GlobalKeep,
            nd::Matrix::ones(frames, latent_size)};
  }
};

namespace detail {
inline void check_sizes(std::size_t n_b, std::size_t n_l) {
  if (n_l == 0 || n_b == 0 || n_b > n_l)
    throw ConfigError("bottleneck: need 0 < n_b <= n_l (n_b=" + std::to_string(n_b) +
                      ", n_l=" + std::to_string(n_l) + ")");
}

inline void check_rates(std::span<const double> rates) {
  for (std::size_t t = 0; t < rates.size(); ++t)
    if (!(rates[t] >= 0.0 && rates[t] <= 1.0))
      throw ConfigError("bottleneck: rate " + std::to_string(rates[t]) + " at frame " +
                        std::to_string(t) + " outside [0, 1]");
}
}  // namespace detail

/// Dropout rate that leaves n_b of n_l features on average.
inline double rate_for_target(std::size_t n_b, std::size_t n_l) {
  detail::check_sizes(n_b, n_l);
  return 1.0 - static_cast<double>(n_b) / static_cast<double>(n_l);
}

/// Probability that independent dropout at rate 1 - n_b/n_l keeps all n_l
/// features: (n_b/n_l)^n_l.
inline double survival_probability(std::size_t n_b, std::size_t n_l) {
  detail::check_sizes(n_b, n_l);
  return std::pow(static_cast<double>(n_b) / static_cast<double>(n_l),
                  static_cast<double>(n_l));
}

inline nd::Matrix rabo_mask(std::span<const double> rates, std::size_t n_l, nd::Rng& rng) {
  detail::check_rates(rates);
  nd::Matrix mask(rates.size(), n_l);
  for (std::size_t t = 0; t < rates.size(); ++t)
    for (std::size_t j = 0; j < n_l; ++j) mask(t, j) = rng.bernoulli(rates[t]) ? 0.0 : 1.0;
  return mask;
}

inline nd::Matrix hibo_mask(std::span<const double> rates, std::size_t n_l, nd::Rng& rng) {
  detail::check_rates(rates);
  nd::Matrix mask(rates.size(), n_l);
  for (std::size_t t = 0; t < rates.size(); ++t) {
    const std::size_t dropped = rng.binomial(n_l, rates[t]);
    for (std::size_t j = 0; j < n_l - dropped; ++j) mask(t, j) = 1.0;
  }
  return mask;
}

/// Zero the whole sample with probability mean(rates), otherwise keep it.
inline PlanBranch globo_decide(std::span<const double> rates, nd::Rng& rng) {
  if (rates.empty()) throw ConfigError("globo_decide: empty rate sequence");
  detail::check_rates(rates);
  double mean = 0.0;
  for (double r : rates) mean += r;
  mean /= static_cast<double>(rates.size());
  return rng.bernoulli(mean) ? PlanBranch::GlobalZero : PlanBranch::GlobalKeep;
}

/// Per-frame dropout rates: 1 - n_b(voice)/n_l for voiced frames, 0 for
/// unvoiced ones.
inline std::vector<double> frame_rates(const BottleneckConfig& cfg,
                                       std::span<const FrameClass> frames) {
  std::vector<double> rates(frames.size(), 0.0);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto it = cfg.target_size.find(frames[t].voice);
    if (it == cfg.target_size.end())
      throw ConfigError("make_plan: no target size for frame class '" +
                        std::string(to_string(frames[t].voice)) + "' at frame " +
                        std::to_string(t));
    if (frames[t].voiced) rates[t] = rate_for_target(it->second, cfg.latent_size);
  }
  return rates;
}

/// Builds the dropout plan for one training sample. The global/per-frame
/// decision always consumes exactly one draw, first, for every kind.
inline DropoutPlan make_plan(const BottleneckConfig& cfg, std::span<const FrameClass> frames,
                             nd::Rng& rng) {
  cfg.validate();
  DropoutPlan plan;
  plan.rates = frame_rates(cfg, frames);
  const bool global = rng.bernoulli(cfg.p_global);
  const std::size_t n = frames.size();
  if (cfg.kind == BottleneckKind::Nobo) {
    plan.branch = PlanBranch::PerFrame;
    plan.mask = nd::Matrix::ones(n, cfg.latent_size);
    return plan;
  }
  if (global && n > 0) {
    plan.branch = globo_decide(plan.rates, rng);
    plan.mask = plan.branch == PlanBranch::GlobalKeep ? nd::Matrix::ones(n, cfg.latent_size)
                                                      : nd::Matrix::zeros(n, cfg.latent_size);
    return plan;
  }
  plan.branch = PlanBranch::PerFrame;
  plan.mask = cfg.kind == BottleneckKind::Rabo ? rabo_mask(plan.rates, cfg.latent_size, rng)
                                               : hibo_mask(plan.rates, cfg.latent_size, rng);
  return plan;
}

/// Elementwise factor applied to the latent: the mask, with kept entries of
/// per-frame plans scaled by 1/(1 - r_t) when `rescale_kept` is set.
inline nd::Matrix bottleneck_factor(const DropoutPlan& plan, bool rescale_kept) {
  nd::Matrix f = plan.mask;
  if (!rescale_kept || plan.branch != PlanBranch::PerFrame) return f;
  for (std::size_t t = 0; t < f.rows(); ++t) {
    const double keep = 1.0 - plan.rates.at(t);
    if (keep <= 0.0) continue;
    for (double& v : f.row(t)) v /= keep;
  }
  return f;
}

inline void check_plan_shape(const nd::Matrix& latent, const DropoutPlan& plan) {
  if (!latent.same_shape(plan.mask))
    throw DimensionError("apply_bottleneck: latent " + latent.shape_string() + " vs mask " +
                         plan.mask.shape_string());
}

inline nd::Matrix apply_bottleneck(const nd::Matrix& latent, const DropoutPlan& plan,
                                   bool rescale_kept = false) {
  check_plan_shape(latent, plan);
  return nd::hadamard(latent, bottleneck_factor(plan, rescale_kept));
}

/// Taped version; gradient reaches the latent only through kept entries.
inline nd::Var apply_bottleneck(nd::Var latent, const DropoutPlan& plan,
                                bool rescale_kept = false) {
  check_plan_shape(latent.tape->value(latent), plan);
  return nd::scale_by(latent, bottleneck_factor(plan, rescale_kept));
}

}  // namespace vasb
