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

// Evaluation of trained models: transposition error curves, latent leakage
// probing, discretization detection and the erasure-capacity check.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "vasb/errors.hpp"
#include "vasb/io.hpp"
#include "vasb/model.hpp"
#include "vasb/ndcore/matrix.hpp"
#include "vasb/ndcore/rng.hpp"
#include "vasb/synthdata.hpp"

namespace vasb {

inline std::vector<double> offset_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("eval.grid: need step > 0 and max >= min");
  std::vector<double> g;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) g.push_back(lo + step * static_cast<double>(i));
  return g;
}

/// Mean absolute control error (cents) per transposition offset.
struct ErrorCurve {
  std::vector<double> offsets;
  std::vector<double> mean_abs_error;    // NaN where n_frames == 0
  std::vector<std::size_t> n_frames;     // estimated, in-range voiced frames
  std::vector<std::size_t> n_no_estimate;
  std::vector<std::size_t> n_out_of_range;
  std::vector<bool> collapsed;           // more than half without estimate

  std::size_t size() const noexcept { return offsets.size(); }

  /// Error at `offset`; NaN if the grid lacks it.
  double at(double offset) const {
    for (std::size_t i = 0; i < offsets.size(); ++i)
      if (std::abs(offsets[i] - offset) < 1e-9) return mean_abs_error[i];
    return std::numeric_limits<double>::quiet_NaN();
  }
};

/// Same errors binned by absolute target control.
struct TargetBins {
  std::vector<double> lower;  // bin [lower, lower + width)
  double width = 200.0;
  std::vector<double> mean_abs_error;
  std::vector<std::size_t> n_frames;
};

struct EvalOptions {
  std::vector<double> grid = offset_grid(-2400.0, 2400.0, 200.0);
  double window_cents = 200.0;
  double slope_threshold = 0.5;
  double discretization_min_offset = 1200.0;
  double discretization_step = 5.0;
  std::size_t discretization_sources = 48;
  double target_bin_width = 200.0;
};

/// Per-offset error and the absolute-target view of the same estimates.
struct CurveResult {
  ErrorCurve curve;
  TargetBins bins;
};

/// Transposes every sample by each offset and measures how far the
/// estimated control of the output lands from the requested one. Frames
/// whose target leaves the generator's control range are counted as out of
/// range and skipped.
inline CurveResult error_curve_with_bins(const AutoEncoder& model, const Corpus& corpus,
                                         std::span<const double> grid,
                                         const ControlEstimator& estimator,
                                         double bin_width = 200.0) {
  detail::require_finite_weights(model, "error_curve");
  const ControlRange range = corpus.params.global_range();
  std::vector<nd::Matrix> codes;
  codes.reserve(corpus.samples.size());
  for (const Sample& s : corpus.samples) codes.push_back(encode(model, s.frames));

  CurveResult res;
  TargetBins& bins = res.bins;
  bins.width = bin_width;
  const auto n_bins = static_cast<std::size_t>(std::ceil(range.width() / bin_width));
  for (std::size_t i = 0; i < n_bins; ++i) bins.lower.push_back(range.lo + bin_width * static_cast<double>(i));
  std::vector<double> bin_sum(n_bins, 0.0);
  bins.n_frames.assign(n_bins, 0);

  ErrorCurve& c = res.curve;
  for (double offset : grid) {
    std::vector<double> targets;
    nd::Matrix outputs;
    std::size_t out_of_range = 0;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
      const Sample& s = corpus.samples[i];
      const nd::Matrix out = decode(model, codes[i], model.conditioning().build(s, offset));
      for (std::size_t t = 0; t < s.length(); ++t) {
        if (!s.voiced[t]) continue;
        const double target = s.control[t] + offset;
        if (!range.contains(target)) {
          ++out_of_range;
          continue;
        }
        targets.push_back(target);
        rows.emplace_back(out.row(t).begin(), out.row(t).end());
      }
    }
    outputs = nd::Matrix(rows.size(), corpus.params.n_bins);
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy(rows[r].begin(), rows[r].end(), outputs.row(r).begin());
    const auto est = estimator.analyse_all(outputs);
    double sum = 0.0;
    std::size_t n = 0, missing = 0;
    for (std::size_t r = 0; r < est.size(); ++r) {
      if (!est[r].cents) {
        ++missing;
        continue;
      }
      const double err = std::abs(*est[r].cents - targets[r]);
      sum += err;
      ++n;
      const auto b = std::min(n_bins - 1, static_cast<std::size_t>((targets[r] - range.lo) / bin_width));
      bin_sum[b] += err;
      ++bins.n_frames[b];
    }
    c.offsets.push_back(offset);
    c.mean_abs_error.push_back(n ? sum / static_cast<double>(n)
                                 : std::numeric_limits<double>::quiet_NaN());
    c.n_frames.push_back(n);
    c.n_no_estimate.push_back(missing);
    c.n_out_of_range.push_back(out_of_range);
    c.collapsed.push_back(2 * missing > n + missing);
  }
  for (std::size_t b = 0; b < n_bins; ++b)
    bins.mean_abs_error.push_back(bins.n_frames[b] ? bin_sum[b] / static_cast<double>(bins.n_frames[b])
                                                   : std::numeric_limits<double>::quiet_NaN());
  return res;
}

inline ErrorCurve error_curve(const AutoEncoder& model, const Corpus& corpus,
                              std::span<const double> grid, const ControlEstimator& estimator) {
  return error_curve_with_bins(model, corpus, grid, estimator).curve;
}

inline ErrorCurve error_curve(const AutoEncoder& model, const Corpus& corpus,
                              std::span<const double> grid) {
  return error_curve(model, corpus, grid, ControlEstimator(corpus.params));
}

namespace detail {

/// Even/odd split of (codes, controls), standardised with training-half
/// statistics. Constant code columns are dropped.
struct ProbeSplit {
  Eigen::MatrixXd x_train, x_test;
  Eigen::VectorXd y_train, y_test;
};

inline ProbeSplit probe_split(const nd::Matrix& codes, std::span<const double> controls,
                              const char* who) {
  const std::size_t n = codes.rows(), d = codes.cols();
  if (controls.size() != n)
    throw DimensionError(std::string(who) + ": " + std::to_string(n) + " code rows vs " +
                         std::to_string(controls.size()) + " controls");
  if (n < 10 * d)
    throw EvalError(std::string(who) + ": need at least 10 frames per latent feature");
  const std::size_t n_train = (n + 1) / 2, n_test = n / 2;

  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  double y_mean = 0.0, y_sd = 0.0;
  for (std::size_t i = 0; i < n; i += 2) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += codes(i, j);
    y_mean += controls[i];
  }
  for (double& m : mean) m /= static_cast<double>(n_train);
  y_mean /= static_cast<double>(n_train);
  for (std::size_t i = 0; i < n; i += 2) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (codes(i, j) - mean[j]) * (codes(i, j) - mean[j]);
    y_sd += (controls[i] - y_mean) * (controls[i] - y_mean);
  }
  y_sd = std::sqrt(y_sd / static_cast<double>(n_train));
  if (!(y_sd > 1e-12)) throw EvalError(std::string(who) + ": controls are constant");
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < d; ++j) {
    sd[j] = std::sqrt(sd[j] / static_cast<double>(n_train));
    if (sd[j] > 1e-12 * (1.0 + std::abs(mean[j]))) keep.push_back(j);
  }

  auto fill = [&](std::size_t first, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
    const std::size_t rows = first == 0 ? n_train : n_test;
    x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(keep.size()));
    y.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t i = first, r = 0; i < n; i += 2, ++r) {
      for (std::size_t k = 0; k < keep.size(); ++k)
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
            (codes(i, keep[k]) - mean[keep[k]]) / sd[keep[k]];
      y(static_cast<Eigen::Index>(r)) = (controls[i] - y_mean) / y_sd;
    }
  };
  ProbeSplit s;
  fill(0, s.x_train, s.y_train);
  fill(1, s.x_test, s.y_test);
  return s;
}

inline double held_out_r2(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred,
                          const char* who) {
  const double mean = truth.mean();
  const double ss_tot = (truth.array() - mean).square().sum();
  const double ss_res = (truth - pred).squaredNorm();
  if (!(ss_tot > 0.0)) throw EvalError(std::string(who) + ": held-out controls are constant");
  return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

inline Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  double gamma) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd k = -2.0 * (a * b.transpose());
  k.colwise() += na;
  k.rowwise() += nb.transpose();
  return (-gamma * k.array().max(0.0)).exp().matrix();
}

}  // namespace detail

/// Held-out linear decodability of the control from the codes. Ridge
/// regression (lambda = 1e-3 on standardised features) is fitted on frames
/// with even index and scored (R², clamped to [0, 1]) on odd ones.
inline double linear_leakage_probe(const nd::Matrix& codes, std::span<const double> controls,
                                   double lambda = 1e-3) {
  const auto s = detail::probe_split(codes, controls, "linear_leakage_probe");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(s.x_train.cols());
  if (s.x_train.cols() > 0) {
    const double inv_n = 1.0 / static_cast<double>(s.x_train.rows());
    Eigen::MatrixXd gram = inv_n * (s.x_train.transpose() * s.x_train);
    gram.diagonal().array() += lambda;
    w = gram.ldlt().solve(inv_n * (s.x_train.transpose() * s.y_train));
  }
  return detail::held_out_r2(s.y_test, s.x_test * w, "linear_leakage_probe");
}

/// Held-out nonlinear decodability of the control from the codes. Kernel
/// ridge regression with an RBF kernel (gamma = gamma_scale / features,
/// lambda = 1e-3 per training frame) on standardised features, same split
/// and scoring as linear_leakage_probe. Inputs longer than `max_frames` are
/// thinned with a fixed stride before splitting.
inline double leakage_probe(const nd::Matrix& codes, std::span<const double> controls,
                            double lambda = 1e-3, double gamma_scale = 1.0,
                            std::size_t max_frames = 4000) {
  if (controls.size() != codes.rows())
    throw DimensionError("leakage_probe: " + std::to_string(codes.rows()) + " code rows vs " +
                         std::to_string(controls.size()) + " controls");
  const nd::Matrix* x = &codes;
  std::span<const double> y = controls;
  nd::Matrix thinned;
  std::vector<double> thinned_y;
  if (codes.rows() > max_frames) {
    const std::size_t stride = (codes.rows() + max_frames - 1) / max_frames;
    const std::size_t rows = (codes.rows() + stride - 1) / stride;
    thinned = nd::Matrix(rows, codes.cols());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < codes.cols(); ++j) thinned(r, j) = codes(r * stride, j);
      thinned_y.push_back(controls[r * stride]);
    }
    x = &thinned;
    y = thinned_y;
  }
  const auto s = detail::probe_split(*x, y, "leakage_probe");
  if (s.x_train.cols() == 0)
    return detail::held_out_r2(s.y_test, Eigen::VectorXd::Zero(s.y_test.size()), "leakage_probe");
  const double gamma = gamma_scale / static_cast<double>(s.x_train.cols());
  Eigen::MatrixXd k = detail::rbf_kernel(s.x_train, s.x_train, gamma);
  k.diagonal().array() += lambda * static_cast<double>(s.x_train.rows());
  const Eigen::VectorXd alpha = k.ldlt().solve(s.y_train);
  const Eigen::VectorXd pred = detail::rbf_kernel(s.x_test, s.x_train, gamma) * alpha;
  return detail::held_out_r2(s.y_test, pred, "leakage_probe");
}

/// Codes and controls of every voiced frame of `corpus`, no dropout.
inline std::pair<nd::Matrix, std::vector<double>> voiced_codes(const AutoEncoder& model,
                                                                const Corpus& corpus) {
  std::vector<double> controls;
  std::vector<std::vector<double>> rows;
  for (const Sample& s : corpus.samples) {
    const nd::Matrix c = encode(model, s.frames);
    for (std::size_t t = 0; t < s.length(); ++t)
      if (s.voiced[t]) {
        rows.emplace_back(c.row(t).begin(), c.row(t).end());
        controls.push_back(s.control[t]);
      }
  }
  nd::Matrix m(rows.size(), model.latent_size());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  return {std::move(m), std::move(controls)};
}

/// Fraction of 200-cent target windows in which the least-squares slope of
/// estimate vs target falls below `slope_threshold`. 0 means continuous
/// tracking, 1 means the output sits on plateaus.
inline double discretization_index(std::span<const double> targets,
                                   std::span<const double> estimates,
                                   double window_cents = 200.0, double slope_threshold = 0.5) {
  if (targets.size() != estimates.size())
    throw EvalError("discretization_index: sequences differ in length");
  if (targets.size() < 100) throw EvalError("discretization_index: need at least 100 points");
  const auto [lo_it, hi_it] = std::minmax_element(targets.begin(), targets.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi - lo < 800.0) throw EvalError("discretization_index: targets span less than 800 cents");
  const auto windows = static_cast<std::size_t>(std::floor((hi - lo) / window_cents)) + 1;
  struct Acc {
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  };
  std::vector<Acc> acc(windows);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto w = std::min(windows - 1, static_cast<std::size_t>((targets[i] - lo) / window_cents));
    Acc& a = acc[w];
    a.n += 1;
    a.sx += targets[i];
    a.sy += estimates[i];
    a.sxx += targets[i] * targets[i];
    a.sxy += targets[i] * estimates[i];
  }
  std::size_t used = 0, flat = 0;
  for (const Acc& a : acc) {
    if (a.n < 3) continue;
    const double var = a.sxx - a.sx * a.sx / a.n;
    if (!(var > 1e-9)) continue;
    const double slope = (a.sxy - a.sx * a.sy / a.n) / var;
    ++used;
    if (slope < slope_threshold) ++flat;
  }
  if (used == 0) throw EvalError("discretization_index: no window has enough points");
  return static_cast<double>(flat) / static_cast<double>(used);
}

/// Sweeps the conditioning of individual source frames continuously from
/// `min_offset` upwards (to the top of the control range) and averages
/// discretization_index over sources. Each source is evaluated on its own,
/// so the index reflects how the output follows the requested control
/// rather than how the sources are distributed.
struct DiscretizationProbe {
  double index = std::numeric_limits<double>::quiet_NaN();
  std::size_t sources = 0;
};

inline DiscretizationProbe discretization_probe(const AutoEncoder& model, const Corpus& corpus,
                                                const ControlEstimator& estimator,
                                                const EvalOptions& opt = {}) {
  const ControlRange range = corpus.params.global_range();
  struct Source {
    std::size_t sample, frame;
  };
  std::vector<Source> eligible;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& s = corpus.samples[i];
    for (std::size_t t = 0; t < s.length(); ++t)
      if (s.voiced[t] && s.control[t] + opt.discretization_min_offset + 800.0 <= range.hi)
        eligible.push_back({i, t});
  }
  DiscretizationProbe res;
  if (eligible.empty() || opt.discretization_sources == 0) return res;
  const std::size_t count = std::min(opt.discretization_sources, eligible.size());
  double total = 0.0;
  std::size_t last_sample = corpus.samples.size();
  nd::Matrix codes;
  for (std::size_t k = 0; k < count; ++k) {
    const Source src = eligible[k * eligible.size() / count];
    const Sample& s = corpus.samples[src.sample];
    if (src.sample != last_sample) {
      codes = encode(model, s.frames);
      last_sample = src.sample;
    }
    const double a = s.control[src.frame];
    const std::vector<double> offsets =
        offset_grid(opt.discretization_min_offset, range.hi - a, opt.discretization_step);
    nd::Matrix c(offsets.size(), model.latent_size()), y(offsets.size(), kConditioningDims);
    for (std::size_t r = 0; r < offsets.size(); ++r) {
      std::copy(codes.row(src.frame).begin(), codes.row(src.frame).end(), c.row(r).begin());
      y(r, 0) = model.conditioning().normalise(a + offsets[r]);
      y(r, 1) = 1.0;
    }
    const auto est = estimator.analyse_all(decode(model, c, y));
    std::vector<double> targets, estimates;
    for (std::size_t r = 0; r < est.size(); ++r)
      if (est[r].cents) {
        targets.push_back(a + offsets[r]);
        estimates.push_back(*est[r].cents);
      }
    if (targets.size() < 100) {
      // Output without a usable estimate over most of the sweep.
      total += 1.0;
      ++res.sources;
      continue;
    }
    const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
    if (*hi - *lo < 800.0) {
      total += 1.0;
      ++res.sources;
      continue;
    }
    total += discretization_index(targets, estimates, opt.window_cents, opt.slope_threshold);
    ++res.sources;
  }
  res.index = total / static_cast<double>(res.sources);
  return res;
}

struct CapacityCheck {
  double empirical_bits = 0.0;
  double analytic_bits = 0.0;
};

/// Simulates a single latent feature carrying a uniform symbol from
/// {1..alphabet_size} through independent zeroing at rate r and returns the
/// plug-in mutual information against (1 - r) log2(alphabet_size).
inline CapacityCheck erasure_capacity_check(std::size_t alphabet_size, double r,
                                            std::size_t n_draws, nd::Rng& rng) {
  if (alphabet_size < 2) throw ConfigError("erasure_capacity_check: alphabet needs >= 2 symbols");
  if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("erasure_capacity_check: rate outside [0, 1]");
  if (n_draws == 0) throw ConfigError("erasure_capacity_check: need draws");
  const std::size_t k = alphabet_size + 1;  // symbol 0 is the erasure
  std::vector<double> joint(k * k, 0.0), px(k, 0.0), py(k, 0.0);
  for (std::size_t i = 0; i < n_draws; ++i) {
    const std::size_t x = 1 + rng.below(alphabet_size);
    const std::size_t y = rng.bernoulli(r) ? 0 : x;
    joint[x * k + y] += 1.0;
  }
  const double n = static_cast<double>(n_draws);
  for (std::size_t x = 0; x < k; ++x)
    for (std::size_t y = 0; y < k; ++y) {
      joint[x * k + y] /= n;
      px[x] += joint[x * k + y];
      py[y] += joint[x * k + y];
    }
  double mi = 0.0;
  for (std::size_t x = 0; x < k; ++x)
    for (std::size_t y = 0; y < k; ++y) {
      const double p = joint[x * k + y];
      if (p > 0.0) mi += p * std::log2(p / (px[x] * py[y]));
    }
  return {mi, (1.0 - r) * std::log2(static_cast<double>(alphabet_size))};
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
  ErrorCurve curve;
  TargetBins bins;
  double leakage_r2 = 0.0;
  double leakage_r2_linear = 0.0;
  double discretization_index = 0.0;
  std::size_t discretization_sources = 0;
  double recon_mse = 0.0;
  std::string fingerprint;
};

inline std::uint64_t model_hash(const AutoEncoder& m) {
  std::uint64_t h = nd::fnv1a64(nlohmann::json(m.config()).dump());
  for (const auto& p : m.parameters()) {
    const auto* bytes = reinterpret_cast<const char*>(p.value.data().data());
    h = nd::fnv1a64(std::string_view(bytes, p.value.size() * sizeof(double)), h);
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

/// Identifies (model weights, evaluation corpus, grid).
inline std::string eval_fingerprint(const AutoEncoder& m, const Corpus& corpus,
                                    std::span<const double> grid) {
  std::uint64_t h = model_hash(m);
  h = nd::derive(h, corpus.seed);
  h = nd::derive(h, fingerprint(corpus.params));
  for (double g : grid) h = nd::derive(h, std::bit_cast<std::uint64_t>(g));
  return hex64(h);
}

inline double reconstruction_mse(const AutoEncoder& model, const Corpus& corpus) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const Sample& s : corpus.samples) {
    const nd::Matrix out = transform(model, s, 0.0);
    sum += nd::mse_loss(out, s.frames) * static_cast<double>(out.size());
    n += out.size();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline EvalReport evaluate(const AutoEncoder& model, const Corpus& corpus,
                           const EvalOptions& opt = {}) {
  const ControlEstimator estimator(corpus.params);
  EvalReport r;
  auto [curve, bins] = error_curve_with_bins(model, corpus, opt.grid, estimator, opt.target_bin_width);
  r.curve = std::move(curve);
  r.bins = std::move(bins);
  const auto [codes, controls] = voiced_codes(model, corpus);
  r.leakage_r2 = leakage_probe(codes, controls);
  r.leakage_r2_linear = linear_leakage_probe(codes, controls);
  const DiscretizationProbe d = discretization_probe(model, corpus, estimator, opt);
  r.discretization_index = d.index;
  r.discretization_sources = d.sources;
  r.recon_mse = reconstruction_mse(model, corpus);
  r.fingerprint = eval_fingerprint(model, corpus, opt.grid);
  return r;
}

/// Shortest round-trip decimal form; "nan" for NaN.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Report layout (tab-separated, '#' lines are comments):
//
//   # vasb-eval-report version=1
//   # fingerprint=<16 hex digits>
//   record  offset  mean_abs_error  n_frames  n_no_estimate  n_out_of_range  collapsed
//   point   <one row per grid offset>
//   target_bin  <lower>  <mean_abs_error>  <n_frames>  -  -  -
//   summary <key>  <value>
//
// Summary keys: leakage_r2, leakage_r2_linear, discretization_index, discretization_sources,
// recon_mse, grid_points, fingerprint.
inline void write_report(std::ostream& out, const EvalReport& r) {
  out << "# vasb-eval-report version=1\n";
  out << "# fingerprint=" << r.fingerprint << "\n";
  out << "record\toffset\tmean_abs_error\tn_frames\tn_no_estimate\tn_out_of_range\tcollapsed\n";
  const ErrorCurve& c = r.curve;
  for (std::size_t i = 0; i < c.size(); ++i)
    out << "point\t" << format_number(c.offsets[i]) << '\t' << format_number(c.mean_abs_error[i])
        << '\t' << c.n_frames[i] << '\t' << c.n_no_estimate[i] << '\t' << c.n_out_of_range[i]
        << '\t' << (c.collapsed[i] ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < r.bins.lower.size(); ++i)
    out << "target_bin\t" << format_number(r.bins.lower[i]) << '\t'
        << format_number(r.bins.mean_abs_error[i]) << '\t' << r.bins.n_frames[i] << "\t-\t-\t-\n";
  out << "summary\tleakage_r2\t" << format_number(r.leakage_r2) << '\n';
  out << "summary\tleakage_r2_linear\t" << format_number(r.leakage_r2_linear) << '\n';
  out << "summary\tdiscretization_index\t" << format_number(r.discretization_index) << '\n';
  out << "summary\tdiscretization_sources\t" << r.discretization_sources << '\n';
  out << "summary\trecon_mse\t" << format_number(r.recon_mse) << '\n';
  out << "summary\tgrid_points\t" << c.size() << '\n';
  out << "summary\tfingerprint\t" << r.fingerprint << '\n';
}

/// Columnar plot data: offset vs error, then a blank line and target bins.
inline void write_plot_data(std::ostream& out, const EvalReport& r) {
  out << "offset_cents\tmean_abs_error_cents\tn_frames\n";
  for (std::size_t i = 0; i < r.curve.size(); ++i)
    out << format_number(r.curve.offsets[i]) << '\t' << format_number(r.curve.mean_abs_error[i])
        << '\t' << r.curve.n_frames[i] << '\n';
}

inline double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError("report: bad number '" + s + "'");
  return v;
}

inline EvalReport read_report(std::istream& in) {
  EvalReport r;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, '\t');) f.push_back(tok);
    if (f[0] == "record") {
      header = true;
    } else if (f[0] == "point" && f.size() == 7) {
      r.curve.offsets.push_back(parse_number(f[1]));
      r.curve.mean_abs_error.push_back(parse_number(f[2]));
      r.curve.n_frames.push_back(std::stoul(f[3]));
      r.curve.n_no_estimate.push_back(std::stoul(f[4]));
      r.curve.n_out_of_range.push_back(std::stoul(f[5]));
      r.curve.collapsed.push_back(f[6] == "1");
    } else if (f[0] == "target_bin" && f.size() >= 4) {
      r.bins.lower.push_back(parse_number(f[1]));
      r.bins.mean_abs_error.push_back(parse_number(f[2]));
      r.bins.n_frames.push_back(std::stoul(f[3]));
    } else if (f[0] == "summary" && f.size() == 3) {
      if (f[1] == "leakage_r2") r.leakage_r2 = parse_number(f[2]);
      else if (f[1] == "leakage_r2_linear") r.leakage_r2_linear = parse_number(f[2]);
      else if (f[1] == "discretization_index") r.discretization_index = parse_number(f[2]);
      else if (f[1] == "discretization_sources") r.discretization_sources = std::stoul(f[2]);
      else if (f[1] == "recon_mse") r.recon_mse = parse_number(f[2]);
      else if (f[1] == "fingerprint") r.fingerprint = f[2];
    } else {
      throw IoError("report: unrecognised record '" + f[0] + "'");
    }
  }
  if (!header) throw IoError("report: missing header row");
  if (r.bins.lower.size() >= 2) r.bins.width = r.bins.lower[1] - r.bins.lower[0];
  return r;
}

}  // namespace vasb
