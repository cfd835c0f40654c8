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

// Synthetic controllable corpus.
//
// A frame is a log-frequency "spectrum" of n_bins bins, 100 cents per bin,
// bin 0 centred at bin_f_lo Hz. A voiced frame with control a (cents
// relative to f_ref) and content z is
//
//   x[b] = noise_floor + sum_{k=1..K} amp_k(z) * exp(-0.5 ((b - pos_k) / w)^2)
//   pos_k = 1200 log2(k f_ref 2^(a/1200) / bin_f_lo) / 100
//   amp_1 = 1
//   amp_k = 0.95 * 0.92^(k-2) * (0.5 + 0.45 tanh(s_{k-2})),  k >= 2
//   s = B z,  B[i][j] = cos(pi (j+1) (i+0.5) / (K-1))
//
// so the control translates a harmonic comb along the bin axis and the
// content shapes the envelope of harmonics 2..K. The first harmonic is
// always the strongest peak. Unvoiced frames are noise_floor plus i.i.d.
// uniform noise and carry no control.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vasb/errors.hpp"
#include "vasb/io.hpp"
#include "vasb/ndcore/matrix.hpp"
#include "vasb/ndcore/rng.hpp"
#include "vasb/voice.hpp"

namespace vasb {

inline constexpr std::size_t kMaxContentDims = 8;

struct ControlRange {
  double lo = 0.0;
  double hi = 0.0;

  double width() const noexcept { return hi - lo; }
  bool contains(double a) const noexcept { return a >= lo && a <= hi; }
  friend bool operator==(const ControlRange&, const ControlRange&) = default;
};

struct GenParams {
  std::size_t n_bins = 80;
  double f_ref = 220.0;
  double bin_f_lo = 80.0;
  double cents_per_bin = 100.0;
  std::size_t harmonics = 10;
  double bump_width_bins = 0.75;
  std::map<VoiceType, std::size_t> content_dims = {{VoiceType::SpeechLike, 8},
                                                   {VoiceType::SingingLike, 3}};
  std::map<VoiceType, ControlRange> control_range = {
      {VoiceType::SpeechLike, {-1200.0, 1200.0}},
      {VoiceType::SingingLike, {-1200.0, 2400.0}}};
  double noise_floor = 0.01;
  double unvoiced_noise = 0.1;
  double unvoiced_fraction = 0.15;
  double high_pitch_probability = 0.10;
  double high_pitch_quantile = 0.75;

  void validate() const {
    if (n_bins < 8) throw ConfigError("params.n_bins: must be >= 8");
    if (!(f_ref > 0.0)) throw ConfigError("params.f_ref: must be > 0");
    if (!(bin_f_lo > 0.0)) throw ConfigError("params.bin_f_lo: must be > 0");
    if (!(cents_per_bin > 0.0)) throw ConfigError("params.cents_per_bin: must be > 0");
    if (harmonics < 2 || harmonics - 1 < kMaxContentDims)
      throw ConfigError("params.harmonics: need at least " +
                        std::to_string(kMaxContentDims + 1));
    if (!(bump_width_bins > 0.0)) throw ConfigError("params.bump_width_bins: must be > 0");
    if (!(noise_floor >= 0.0)) throw ConfigError("params.noise_floor: must be >= 0");
    if (!(unvoiced_noise >= 0.0)) throw ConfigError("params.unvoiced_noise: must be >= 0");
    if (!(unvoiced_fraction >= 0.0 && unvoiced_fraction < 1.0))
      throw ConfigError("params.unvoiced_fraction: must lie in [0, 1)");
    if (!(high_pitch_probability >= 0.0 && high_pitch_probability <= 1.0))
      throw ConfigError("params.high_pitch_probability: must lie in [0, 1]");
    if (!(high_pitch_quantile > 0.0 && high_pitch_quantile < 1.0))
      throw ConfigError("params.high_pitch_quantile: must lie in (0, 1)");
    for (VoiceType v : kVoiceTypes) {
      const std::string name(to_string(v));
      auto d = content_dims.find(v);
      if (d == content_dims.end()) throw ConfigError("params.content_dims." + name + ": missing");
      if (d->second == 0 || d->second > kMaxContentDims)
        throw ConfigError("params.content_dims." + name + ": must lie in [1, 8]");
      auto r = control_range.find(v);
      if (r == control_range.end())
        throw ConfigError("params.control_range." + name + ": missing");
      if (!(r->second.lo < r->second.hi))
        throw ConfigError("params.control_range." + name + ": need lo < hi");
    }
    const auto& sp = control_range.at(VoiceType::SpeechLike);
    const auto& si = control_range.at(VoiceType::SingingLike);
    if (!(si.hi > sp.hi))
      throw ConfigError("params.control_range.singing: must extend above the speech range");
  }

  /// Union of the voice-type ranges.
  ControlRange global_range() const {
    ControlRange g{std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
    for (const auto& [v, r] : control_range) {
      g.lo = std::min(g.lo, r.lo);
      g.hi = std::max(g.hi, r.hi);
    }
    return g;
  }

  /// Position of frequency `hz` on the bin axis.
  double bin_of(double hz) const { return 1200.0 * std::log2(hz / bin_f_lo) / cents_per_bin; }

  double frequency(double cents) const { return f_ref * std::exp2(cents / 1200.0); }

  friend bool operator==(const GenParams&, const GenParams&) = default;
};

inline void to_json(nlohmann::json& j, const GenParams& p) {
  nlohmann::json dims, ranges;
  for (const auto& [v, d] : p.content_dims) dims[std::string(to_string(v))] = d;
  for (const auto& [v, r] : p.control_range)
    ranges[std::string(to_string(v))] = nlohmann::json::array({r.lo, r.hi});
  j = {{"n_bins", p.n_bins},
       {"f_ref", p.f_ref},
       {"bin_f_lo", p.bin_f_lo},
       {"cents_per_bin", p.cents_per_bin},
       {"harmonics", p.harmonics},
       {"bump_width_bins", p.bump_width_bins},
       {"content_dims", dims},
       {"control_range", ranges},
       {"noise_floor", p.noise_floor},
       {"unvoiced_noise", p.unvoiced_noise},
       {"unvoiced_fraction", p.unvoiced_fraction},
       {"high_pitch_probability", p.high_pitch_probability},
       {"high_pitch_quantile", p.high_pitch_quantile}};
}

inline void from_json(const nlohmann::json& j, GenParams& p) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("n_bins", p.n_bins);
  get("f_ref", p.f_ref);
  get("bin_f_lo", p.bin_f_lo);
  get("cents_per_bin", p.cents_per_bin);
  get("harmonics", p.harmonics);
  get("bump_width_bins", p.bump_width_bins);
  get("noise_floor", p.noise_floor);
  get("unvoiced_noise", p.unvoiced_noise);
  get("unvoiced_fraction", p.unvoiced_fraction);
  get("high_pitch_probability", p.high_pitch_probability);
  get("high_pitch_quantile", p.high_pitch_quantile);
  if (j.contains("content_dims"))
    for (const auto& [k, v] : j.at("content_dims").items())
      p.content_dims[parse_voice_type(k)] = v.get<std::size_t>();
  if (j.contains("control_range"))
    for (const auto& [k, v] : j.at("control_range").items()) {
      if (!v.is_array() || v.size() != 2)
        throw ConfigError("params.control_range." + k + ": expected [lo, hi]");
      p.control_range[parse_voice_type(k)] = {v[0].get<double>(), v[1].get<double>()};
    }
}

/// Stable hash of the generator settings; corpora and checkpoints built on
/// different settings are incompatible.
inline std::uint64_t fingerprint(const GenParams& p) {
  return nd::fnv1a64(nlohmann::json(p).dump());
}

// ---------------------------------------------------------------------------
// Frame synthesis

namespace detail {

inline double content_basis(std::size_t harmonic_row, std::size_t dim, std::size_t rows) {
  constexpr double kPi = 3.14159265358979323846;
  return std::cos(kPi * static_cast<double>(dim + 1) *
                  (static_cast<double>(harmonic_row) + 0.5) / static_cast<double>(rows));
}

inline std::vector<double> harmonic_amplitudes(std::span<const double> z, const GenParams& p) {
  const std::size_t rows = p.harmonics - 1;
  std::vector<double> amp(p.harmonics, 1.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) s += content_basis(i, j, rows) * z[j];
    amp[i + 1] = 0.95 * std::pow(0.92, static_cast<double>(i)) * (0.5 + 0.45 * std::tanh(s));
  }
  return amp;
}

/// Comb without range checks; `out` must hold n_bins values.
inline void render_comb(double cents, std::span<const double> z, const GenParams& p,
                        std::span<double> out, double floor) {
  const std::vector<double> amp = harmonic_amplitudes(z, p);
  const double f0 = p.frequency(cents);
  const double inv_w = 1.0 / p.bump_width_bins;
  std::fill(out.begin(), out.end(), floor);
  for (std::size_t k = 1; k <= p.harmonics; ++k) {
    const double pos = p.bin_of(static_cast<double>(k) * f0);
    if (pos > static_cast<double>(p.n_bins) + 6.0 * p.bump_width_bins) break;
    const auto lo = static_cast<long>(std::floor(pos - 6.0 * p.bump_width_bins));
    const auto hi = static_cast<long>(std::ceil(pos + 6.0 * p.bump_width_bins));
    for (long b = std::max(0L, lo); b <= hi && b < static_cast<long>(p.n_bins); ++b) {
      const double d = (static_cast<double>(b) - pos) * inv_w;
      out[static_cast<std::size_t>(b)] += amp[k - 1] * std::exp(-0.5 * d * d);
    }
  }
}

}  // namespace detail

/// Voiced frame for control `a` (cents) and content `z` (at most 8 dims).
inline std::vector<double> synth_frame(double a, std::span<const double> z, const GenParams& p) {
  if (z.size() > kMaxContentDims)
    throw GenerationError("synth_frame: content has " + std::to_string(z.size()) +
                          " dims, at most 8 allowed");
  const ControlRange g = p.global_range();
  if (!std::isfinite(a) || !g.contains(a))
    throw GenerationError("synth_frame: control " + std::to_string(a) + " outside [" +
                          std::to_string(g.lo) + ", " + std::to_string(g.hi) + "]");
  std::vector<double> out(p.n_bins);
  detail::render_comb(a, z, p, out, p.noise_floor);
  return out;
}

/// Bin of the first harmonic for control `a`.
inline double first_harmonic_bin(double a, const GenParams& p) {
  return p.bin_of(p.frequency(a));
}

// ---------------------------------------------------------------------------
// Samples and corpora

struct Sample {
  nd::Matrix frames;                  // T × n_bins
  std::vector<double> control;        // cents; NaN where unvoiced
  std::vector<std::uint8_t> voiced;   // 0/1 per frame
  VoiceType voice_type = VoiceType::SpeechLike;
  bool high_pitch = false;            // drawn from the top sub-range
  nd::Matrix content;                 // T × 8 ground truth, zero-padded

  std::size_t length() const noexcept { return control.size(); }

  std::vector<FrameClass> frame_classes() const {
    std::vector<FrameClass> c(length());
    for (std::size_t t = 0; t < c.size(); ++t) c[t] = {voice_type, voiced[t] != 0};
    return c;
  }

  bool operator==(const Sample& o) const {
    // Bitwise, so that NaN controls compare equal.
    return frames == o.frames && voiced == o.voiced && voice_type == o.voice_type &&
           high_pitch == o.high_pitch && content == o.content &&
           control.size() == o.control.size() &&
           std::memcmp(control.data(), o.control.data(), control.size() * sizeof(double)) == 0;
  }
};

/// Sub-range a sample's control is drawn from.
inline ControlRange sample_range(VoiceType v, bool high, const GenParams& p) {
  const ControlRange r = p.control_range.at(v);
  if (v != VoiceType::SingingLike) return r;
  const double split = r.lo + p.high_pitch_quantile * r.width();
  return high ? ControlRange{split, r.hi} : ControlRange{r.lo, split};
}

namespace detail {

inline std::vector<double> control_trajectory(VoiceType v, std::size_t T, ControlRange r,
                                              nd::Rng& rng) {
  constexpr double kTwoPi = 6.283185307179586;
  std::vector<double> a(T);
  auto clamp = [&](double x) { return std::clamp(x, r.lo, r.hi); };
  if (v == VoiceType::SingingLike) {
    // Notes with short glides and vibrato.
    double prev = rng.uniform(r.lo, r.hi);
    double note = prev;
    const double phase = rng.uniform(0.0, kTwoPi);
    std::size_t t = 0;
    while (t < T) {
      const std::size_t len = 6 + rng.below(11);
      note = rng.uniform(r.lo, r.hi);
      for (std::size_t i = 0; i < len && t < T; ++i, ++t) {
        const double glide = i < 2 ? prev + (note - prev) * (static_cast<double>(i) + 1.0) / 3.0
                                   : note;
        a[t] = clamp(glide + 25.0 * std::sin(kTwoPi * static_cast<double>(t) / 6.0 + phase));
      }
      prev = note;
    }
  } else {
    // Continuous glides between knots.
    double from = rng.uniform(r.lo, r.hi);
    std::size_t t = 0;
    while (t < T) {
      const std::size_t len = 4 + rng.below(7);
      const double to = clamp(from + rng.uniform(-500.0, 500.0));
      for (std::size_t i = 0; i < len && t < T; ++i, ++t)
        a[t] = clamp(from + (to - from) * static_cast<double>(i) / static_cast<double>(len));
      from = to;
    }
  }
  return a;
}

inline nd::Matrix content_trajectory(std::size_t dims, std::size_t T, std::size_t knot_spacing,
                                     nd::Rng& rng) {
  nd::Matrix z(T, kMaxContentDims);
  std::vector<double> from(dims), to(dims);
  for (double& v : from) v = rng.uniform(-1.0, 1.0);
  for (std::size_t t0 = 0; t0 < T; t0 += knot_spacing) {
    for (double& v : to) v = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < knot_spacing && t0 + i < T; ++i) {
      const double w = static_cast<double>(i) / static_cast<double>(knot_spacing);
      for (std::size_t j = 0; j < dims; ++j) z(t0 + i, j) = from[j] + (to[j] - from[j]) * w;
    }
    from = to;
  }
  return z;
}

/// Two-state voicing chain whose stationary unvoiced probability is `u`.
inline std::vector<std::uint8_t> voicing(std::size_t T, double u, nd::Rng& rng) {
  const double to_unvoiced = 0.05;
  const double to_voiced = u > 0.0 ? to_unvoiced * (1.0 - u) / u : 1.0;
  std::vector<std::uint8_t> v(T);
  bool voiced = !rng.bernoulli(u);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) voiced = voiced ? !rng.bernoulli(to_unvoiced) : rng.bernoulli(to_voiced);
    v[t] = voiced ? 1 : 0;
  }
  return v;
}

}  // namespace detail

inline Sample gen_sample(VoiceType voice, std::size_t T, const GenParams& p, nd::Rng& rng) {
  p.validate();
  if (T == 0) throw GenerationError("gen_sample: T must be >= 1");
  Sample s;
  s.voice_type = voice;
  s.high_pitch = voice == VoiceType::SingingLike && rng.bernoulli(p.high_pitch_probability);
  const ControlRange range = sample_range(voice, s.high_pitch, p);
  const std::vector<double> a = detail::control_trajectory(voice, T, range, rng);
  const std::size_t dims = p.content_dims.at(voice);
  s.content = detail::content_trajectory(dims, T, voice == VoiceType::SingingLike ? 16 : 3, rng);
  s.voiced = detail::voicing(T, p.unvoiced_fraction, rng);
  s.frames = nd::Matrix(T, p.n_bins);
  s.control.assign(T, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 0; t < T; ++t) {
    auto row = s.frames.row(t);
    if (s.voiced[t]) {
      s.control[t] = a[t];
      detail::render_comb(a[t], s.content.row(t).first(dims), p, row, p.noise_floor);
    } else {
      for (double& v : row) v = p.noise_floor + p.unvoiced_noise * rng.uniform();
    }
  }
  return s;
}

enum class CorpusMix { SpeechOnly, SingingOnly, Mixed };

inline std::string_view to_string(CorpusMix m) noexcept {
  switch (m) {
    case CorpusMix::SpeechOnly: return "SpeechOnly";
    case CorpusMix::SingingOnly: return "SingingOnly";
    case CorpusMix::Mixed: return "Mixed";
  }
  return "?";
}

inline CorpusMix parse_corpus_mix(std::string_view s) {
  if (s == "SpeechOnly") return CorpusMix::SpeechOnly;
  if (s == "SingingOnly") return CorpusMix::SingingOnly;
  if (s == "Mixed") return CorpusMix::Mixed;
  throw ConfigError("unknown corpus mix '" + std::string(s) +
                    "' (expected SpeechOnly, SingingOnly or Mixed)");
}

struct Corpus {
  GenParams params;
  CorpusMix mix = CorpusMix::Mixed;
  std::uint64_t seed = 0;
  std::size_t frames_per_sample = 0;
  std::vector<Sample> samples;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Mixed draws each sample's voice type 50/50. Every sample is generated
/// from its own substream seeded by one draw of `rng`.
inline Corpus make_corpus(CorpusMix mix, std::size_t n_samples, const GenParams& p, nd::Rng& rng,
                          std::size_t frames_per_sample = 32) {
  p.validate();
  if (n_samples == 0) throw GenerationError("make_corpus: n_samples must be >= 1");
  Corpus c{p, mix, 0, frames_per_sample, {}};
  c.samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    VoiceType v = mix == CorpusMix::SingingOnly ? VoiceType::SingingLike : VoiceType::SpeechLike;
    if (mix == CorpusMix::Mixed && rng.bernoulli(0.5)) v = VoiceType::SingingLike;
    nd::Rng sample_rng(rng.next());
    c.samples.push_back(gen_sample(v, frames_per_sample, p, sample_rng));
  }
  return c;
}

inline Corpus generate_corpus(CorpusMix mix, std::size_t n_samples, std::size_t frames_per_sample,
                              const GenParams& p, std::uint64_t seed) {
  nd::Rng rng(seed);
  Corpus c = make_corpus(mix, n_samples, p, rng, frames_per_sample);
  c.seed = seed;
  return c;
}

struct CorpusStats {
  std::size_t samples = 0;
  std::size_t frames = 0;
  double speech_fraction = 0.0;        // of samples
  double high_pitch_fraction = 0.0;    // of singing-like samples
  double voiced_fraction = 0.0;        // of frames
};

inline CorpusStats corpus_stats(const Corpus& c) {
  CorpusStats s;
  std::size_t speech = 0, singing = 0, high = 0, voiced = 0;
  for (const Sample& x : c.samples) {
    (x.voice_type == VoiceType::SpeechLike ? speech : singing) += 1;
    high += x.high_pitch ? 1 : 0;
    s.frames += x.length();
    for (auto v : x.voiced) voiced += v;
  }
  s.samples = c.samples.size();
  if (s.samples) s.speech_fraction = static_cast<double>(speech) / static_cast<double>(s.samples);
  if (singing) s.high_pitch_fraction = static_cast<double>(high) / static_cast<double>(singing);
  if (s.frames) s.voiced_fraction = static_cast<double>(voiced) / static_cast<double>(s.frames);
  return s;
}

// ---------------------------------------------------------------------------
// Control estimation

/// Harmonic-comb matcher built on the generator's own template. For each
/// candidate control on a regular grid the Pearson correlation between the
/// frame and the z = 0 comb is computed; the best grid point is refined by
/// parabolic interpolation. Frames whose best correlation is below
/// `threshold` yield no estimate.
class ControlEstimator {
 public:
  explicit ControlEstimator(const GenParams& p, double step_cents = 10.0,
                            double threshold = 0.6, double margin_cents = 200.0)
      : n_bins_(p.n_bins), step_(step_cents), threshold_(threshold) {
    p.validate();
    const ControlRange g = p.global_range();
    first_ = g.lo - margin_cents;
    const auto n = static_cast<std::size_t>(std::floor((g.width() + 2.0 * margin_cents) / step_)) + 1;
    templates_ = nd::Matrix(n, n_bins_);
    const std::vector<double> zero_content;
    for (std::size_t i = 0; i < n; ++i) {
      auto row = templates_.row(i);
      detail::render_comb(candidate(i), zero_content, p, row, 0.0);
      normalize(row);
    }
  }

  double candidate(std::size_t i) const noexcept {
    return first_ + step_ * static_cast<double>(i);
  }
  std::size_t candidates() const noexcept { return templates_.rows(); }
  double threshold() const noexcept { return threshold_; }

  struct Result {
    std::optional<double> cents;
    double score = 0.0;  // best correlation
  };

  Result analyse(std::span<const double> frame) const {
    nd::Matrix m(1, frame.size(), std::vector<double>(frame.begin(), frame.end()));
    return analyse_all(m).front();
  }

  std::optional<double> estimate(std::span<const double> frame) const {
    return analyse(frame).cents;
  }

  /// One result per row of `frames`.
  std::vector<Result> analyse_all(const nd::Matrix& frames) const {
    if (frames.cols() != n_bins_)
      throw DimensionError("estimate_control: frame has " + std::to_string(frames.cols()) +
                           " bins, expected " + std::to_string(n_bins_));
    nd::Matrix centred = frames;
    std::vector<bool> usable(frames.rows(), true);
    for (std::size_t r = 0; r < centred.rows(); ++r) {
      auto row = centred.row(r);
      if (!std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); })) {
        usable[r] = false;
        std::fill(row.begin(), row.end(), 0.0);
        continue;
      }
      usable[r] = normalize(row);
    }
    const nd::Matrix corr = nd::matmul_nt(centred, templates_);
    std::vector<Result> out(frames.rows());
    for (std::size_t r = 0; r < frames.rows(); ++r) {
      if (!usable[r]) continue;
      auto c = corr.row(r);
      const auto best = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
      out[r].score = c[best];
      if (c[best] < threshold_) continue;
      double delta = 0.0;
      if (best > 0 && best + 1 < c.size()) {
        const double y0 = c[best - 1], y1 = c[best], y2 = c[best + 1];
        const double denom = y0 - 2.0 * y1 + y2;
        if (denom < 0.0) delta = std::clamp(0.5 * (y0 - y2) / denom, -0.5, 0.5);
      }
      out[r].cents = candidate(best) + delta * step_;
    }
    return out;
  }

 private:
  /// Mean-removes and scales `v` to unit norm; false if `v` is constant.
  static bool normalize(std::span<double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double& x : v) {
      x -= mean;
      ss += x * x;
    }
    if (!(ss > 1e-24)) {
      std::fill(v.begin(), v.end(), 0.0);
      return false;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (double& x : v) x *= inv;
    return true;
  }

  std::size_t n_bins_;
  double step_;
  double threshold_;
  double first_ = 0.0;
  nd::Matrix templates_;
};

/// Convenience wrapper; build a ControlEstimator once when estimating many
/// frames.
inline std::optional<double> estimate_control(std::span<const double> frame, const GenParams& p) {
  return ControlEstimator(p).estimate(frame);
}

// ---------------------------------------------------------------------------
// Corpus container
//
//   "VASBCORP" | u32 version | u64 header length | header JSON (UTF-8)
//   per sample: u8 voice | u8 high_pitch | u64 T
//               T × f64 control | T × u8 voiced
//               T·n_bins × f64 frames | T·8 × f64 content
//
// All integers and doubles little-endian; doubles are written as raw IEEE
// bits so a load reproduces the corpus exactly.

inline constexpr std::uint32_t kCorpusVersion = 1;

inline void write_corpus(std::ostream& out, const Corpus& c) {
  io::Writer w(out);
  w.magic("VASBCORP");
  w.u32(kCorpusVersion);
  const nlohmann::json header = {{"format", "vasb-corpus"},
                                 {"version", kCorpusVersion},
                                 {"params", c.params},
                                 {"params_fingerprint", fingerprint(c.params)},
                                 {"mix", to_string(c.mix)},
                                 {"seed", c.seed},
                                 {"frames_per_sample", c.frames_per_sample},
                                 {"n_samples", c.samples.size()}};
  w.string(header.dump());
  for (const Sample& s : c.samples) {
    w.u8(s.voice_type == VoiceType::SingingLike ? 1 : 0);
    w.u8(s.high_pitch ? 1 : 0);
    w.u64(s.length());
    w.f64s(s.control);
    w.bytes(s.voiced);
    w.f64s(s.frames.data());
    w.f64s(s.content.data());
  }
  w.check("corpus");
}

inline Corpus read_corpus(std::istream& in) {
  io::Reader r(in, "corpus");
  r.magic("VASBCORP");
  const std::uint32_t version = r.u32();
  if (version != kCorpusVersion)
    throw CompatibilityError("corpus: unsupported version " + std::to_string(version));
  const nlohmann::json header = nlohmann::json::parse(r.string());
  Corpus c;
  c.params = header.at("params").get<GenParams>();
  c.mix = parse_corpus_mix(header.at("mix").get<std::string>());
  c.seed = header.at("seed").get<std::uint64_t>();
  c.frames_per_sample = header.at("frames_per_sample").get<std::size_t>();
  const auto n = header.at("n_samples").get<std::size_t>();
  const std::size_t bins = c.params.n_bins;
  c.samples.resize(n);
  for (Sample& s : c.samples) {
    s.voice_type = r.u8() ? VoiceType::SingingLike : VoiceType::SpeechLike;
    s.high_pitch = r.u8() != 0;
    const std::size_t T = r.u64();
    s.control = r.f64s(T);
    s.voiced = r.bytes(T);
    s.frames = nd::Matrix(T, bins, r.f64s(T * bins));
    s.content = nd::Matrix(T, kMaxContentDims, r.f64s(T * kMaxContentDims));
  }
  return c;
}

inline void save_corpus(const std::filesystem::path& path, const Corpus& c) {
  io::write_file(path, [&](std::ostream& out) { write_corpus(out, c); });
}

inline Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  return read_corpus(in);
}

}  // namespace vasb
