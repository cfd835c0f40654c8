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

// Conditional bottleneck auto-encoder.
//
//   encoder  E: context window of 2k+1 frames (edge-replicated) -> c_t in R^{n_l}
//   bottleneck: c_t masked by the sample's DropoutPlan
//   decoder  D: [masked c_t | y_t] -> reconstructed frame
//
// Only the decoder sees the conditioning y_t = (normalised control,
// voiced flag). Both stacks are dense relu networks with a linear output.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vasb/bottleneck.hpp"
#include "vasb/errors.hpp"
#include "vasb/io.hpp"
#include "vasb/ndcore/adam.hpp"
#include "vasb/ndcore/autodiff.hpp"
#include "vasb/ndcore/layers.hpp"
#include "vasb/ndcore/matrix.hpp"
#include "vasb/ndcore/rng.hpp"
#include "vasb/synthdata.hpp"

namespace vasb {

inline constexpr std::size_t kConditioningDims = 2;

struct ModelConfig {
  std::size_t n_bins = 80;
  std::size_t latent_size = 16;
  std::size_t context = 2;
  std::vector<std::size_t> encoder_hidden = {256, 256, 256};
  std::vector<std::size_t> decoder_hidden = {256, 256, 256};

  std::size_t encoder_input() const noexcept { return (2 * context + 1) * n_bins; }
  std::size_t decoder_input() const noexcept { return latent_size + kConditioningDims; }

  void validate() const {
    if (n_bins == 0) throw ConfigError("model.n_bins: must be > 0");
    if (latent_size == 0) throw ConfigError("model.latent_size: must be > 0");
    for (std::size_t w : encoder_hidden)
      if (w == 0) throw ConfigError("model.encoder_hidden: widths must be > 0");
    for (std::size_t w : decoder_hidden)
      if (w == 0) throw ConfigError("model.decoder_hidden: widths must be > 0");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  BottleneckConfig bottleneck;
  nd::AdamConfig adam;
  long steps = 20000;
  std::size_t batch_frames = 32;
  std::uint64_t seed = 1;

  void validate() const {
    bottleneck.validate();
    if (steps < 1) throw ConfigError("train.steps: must be >= 1");
    if (!(adam.lr > 0.0)) throw ConfigError("train.lr: must be > 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("train.beta1: must lie in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("train.beta2: must lie in [0, 1)");
    if (!(adam.eps > 0.0)) throw ConfigError("train.eps: must be > 0");
    if (batch_frames == 0) throw ConfigError("train.batch_frames: must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& m) {
  j = {{"n_bins", m.n_bins},
       {"latent_size", m.latent_size},
       {"context", m.context},
       {"encoder_hidden", m.encoder_hidden},
       {"decoder_hidden", m.decoder_hidden}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& m) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("n_bins", m.n_bins);
  get("latent_size", m.latent_size);
  get("context", m.context);
  get("encoder_hidden", m.encoder_hidden);
  get("decoder_hidden", m.decoder_hidden);
}

inline void to_json(nlohmann::json& j, const BottleneckConfig& b) {
  nlohmann::json sizes;
  for (const auto& [v, n] : b.target_size) sizes[std::string(to_string(v))] = n;
  j = {{"kind", to_string(b.kind)},
       {"latent_size", b.latent_size},
       {"target_size", sizes},
       {"p_global", b.p_global},
       {"rescale_kept", b.rescale_kept}};
}

inline void from_json(const nlohmann::json& j, BottleneckConfig& b) {
  if (j.contains("kind")) b.kind = parse_bottleneck_kind(j.at("kind").get<std::string>());
  if (j.contains("latent_size")) j.at("latent_size").get_to(b.latent_size);
  if (j.contains("p_global")) j.at("p_global").get_to(b.p_global);
  if (j.contains("rescale_kept")) j.at("rescale_kept").get_to(b.rescale_kept);
  if (j.contains("target_size")) {
    b.target_size.clear();
    for (const auto& [k, v] : j.at("target_size").items())
      b.target_size[parse_voice_type(k)] = v.get<std::size_t>();
  }
}

inline void to_json(nlohmann::json& j, const TrainConfig& t) {
  j = {{"bottleneck", t.bottleneck}, {"lr", t.adam.lr},
       {"beta1", t.adam.beta1},      {"beta2", t.adam.beta2},
       {"eps", t.adam.eps},          {"steps", t.steps},
       {"batch_frames", t.batch_frames}, {"seed", t.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& t) {
  if (j.contains("bottleneck")) j.at("bottleneck").get_to(t.bottleneck);
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("lr", t.adam.lr);
  get("beta1", t.adam.beta1);
  get("beta2", t.adam.beta2);
  get("eps", t.adam.eps);
  get("steps", t.steps);
  get("batch_frames", t.batch_frames);
  get("seed", t.seed);
}

/// Maps controls in cents onto the decoder's conditioning channel.
struct Conditioning {
  double centre = 600.0;
  double half_width = 1800.0;

  static Conditioning for_params(const GenParams& p) {
    const ControlRange g = p.global_range();
    return {0.5 * (g.lo + g.hi), 0.5 * g.width()};
  }

  double normalise(double cents) const noexcept { return (cents - centre) / half_width; }

  /// T × 2 matrix (control, voiced); unvoiced rows are (0, 0). `offset`
  /// shifts every voiced control.
  nd::Matrix build(const Sample& s, double offset = 0.0) const {
    nd::Matrix y(s.length(), kConditioningDims);
    for (std::size_t t = 0; t < s.length(); ++t) {
      if (!s.voiced[t]) continue;
      y(t, 0) = normalise(s.control[t] + offset);
      y(t, 1) = 1.0;
    }
    return y;
  }

  friend bool operator==(const Conditioning&, const Conditioning&) = default;
};

class AutoEncoder {
 public:
  AutoEncoder() = default;

  AutoEncoder(ModelConfig cfg, Conditioning cond, nd::Rng& rng)
      : cfg_(std::move(cfg)), cond_(cond) {
    cfg_.validate();
    add_stack("encoder", cfg_.encoder_input(), cfg_.encoder_hidden, cfg_.latent_size, rng);
    encoder_layers_ = cfg_.encoder_hidden.size() + 1;
    add_stack("decoder", cfg_.decoder_input(), cfg_.decoder_hidden, cfg_.n_bins, rng);
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  const Conditioning& conditioning() const noexcept { return cond_; }
  std::size_t latent_size() const noexcept { return cfg_.latent_size; }

  std::vector<nd::Parameter>& parameters() noexcept { return params_; }
  const std::vector<nd::Parameter>& parameters() const noexcept { return params_; }

  std::size_t encoder_layers() const noexcept { return encoder_layers_; }
  std::size_t decoder_layers() const noexcept { return params_.size() / 2 - encoder_layers_; }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  bool finite() const noexcept {
    for (const auto& p : params_)
      if (!p.value.all_finite()) return false;
    return true;
  }

  /// Layer `i` of the full stack (encoder first); hidden layers use relu,
  /// the last layer of each stack is linear.
  nd::Activation activation(std::size_t layer) const noexcept {
    const bool last = layer + 1 == encoder_layers_ || layer + 1 == params_.size() / 2;
    return last ? nd::Activation::Linear : nd::Activation::Relu;
  }

  /// Encoder input rows: frames t-k..t+k concatenated, edges replicated.
  nd::Matrix context_window(const nd::Matrix& frames) const {
    if (frames.cols() != cfg_.n_bins)
      throw DimensionError("encode: frames have " + std::to_string(frames.cols()) +
                           " bins, model expects " + std::to_string(cfg_.n_bins));
    const auto T = static_cast<long>(frames.rows());
    const auto k = static_cast<long>(cfg_.context);
    nd::Matrix x(frames.rows(), cfg_.encoder_input());
    for (long t = 0; t < T; ++t)
      for (long d = -k; d <= k; ++d) {
        const long src = std::clamp(t + d, 0L, T - 1);
        auto from = frames.row(static_cast<std::size_t>(src));
        std::copy(from.begin(), from.end(),
                  x.row(static_cast<std::size_t>(t)).begin() + (d + k) * static_cast<long>(cfg_.n_bins));
      }
    return x;
  }

  friend bool operator==(const AutoEncoder& a, const AutoEncoder& b) {
    if (!(a.cfg_ == b.cfg_) || !(a.cond_ == b.cond_) || a.params_.size() != b.params_.size())
      return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
      const auto &x = a.params_[i], &y = b.params_[i];
      if (x.name != y.name || !(x.value == y.value) || !(x.moments.m == y.moments.m) ||
          !(x.moments.v == y.moments.v))
        return false;
    }
    return true;
  }

 private:
  friend AutoEncoder read_model_body(io::Reader&, const nlohmann::json&);

  void add_stack(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden,
                 std::size_t out, nd::Rng& rng) {
    std::size_t prev = in;
    for (std::size_t i = 0; i <= hidden.size(); ++i) {
      const bool last = i == hidden.size();
      const std::size_t width = last ? out : hidden[i];
      auto layer = nd::DenseLayer::init(prev, width,
                                        last ? nd::Activation::Linear : nd::Activation::Relu, rng);
      params_.emplace_back(name + "." + std::to_string(i) + ".weight", std::move(layer.weight));
      params_.emplace_back(name + "." + std::to_string(i) + ".bias", std::move(layer.bias));
      prev = width;
    }
  }

  ModelConfig cfg_;
  Conditioning cond_;
  std::vector<nd::Parameter> params_;  // weight, bias per layer; encoder then decoder
  std::size_t encoder_layers_ = 0;
};

namespace detail {

inline void require_finite(const nd::Matrix& m, const char* what) {
  if (!m.all_finite()) throw ModelError(std::string(what) + ": non-finite input");
}

inline void require_finite_weights(const AutoEncoder& model, const char* what) {
  if (!model.finite()) throw ModelError(std::string(what) + ": model has non-finite weights");
}

inline nd::Matrix run_stack(const AutoEncoder& m, nd::Matrix h, std::size_t first,
                            std::size_t count) {
  const auto& p = m.parameters();
  for (std::size_t l = first; l < first + count; ++l)
    h = nd::dense_forward(h, p[2 * l].value, p[2 * l + 1].value, m.activation(l));
  return h;
}

}  // namespace detail

/// Latent codes (T × n_l). Depends on the frames only.
inline nd::Matrix encode(const AutoEncoder& model, const nd::Matrix& frames) {
  if (frames.rows() == 0) throw DimensionError("encode: need at least one frame");
  detail::require_finite(frames, "encode");
  return detail::run_stack(model, model.context_window(frames), 0, model.encoder_layers());
}

/// Reconstructed frames (T × n_bins) from codes and conditioning (T × 2).
inline nd::Matrix decode(const AutoEncoder& model, const nd::Matrix& codes,
                         const nd::Matrix& conditioning) {
  if (codes.rows() != conditioning.rows() || codes.cols() != model.latent_size() ||
      conditioning.cols() != kConditioningDims)
    throw DimensionError("decode: codes " + codes.shape_string() + ", conditioning " +
                         conditioning.shape_string() + ", n_l " +
                         std::to_string(model.latent_size()));
  return detail::run_stack(model, nd::concat_cols(codes, conditioning), model.encoder_layers(),
                           model.decoder_layers());
}

/// Taped forward pass through bottleneck and decoder; returns the loss node.
struct TapedPass {
  std::vector<nd::Var> params;
  nd::Var input, codes, masked, conditioning, output, loss;
};

inline TapedPass taped_forward(nd::Tape& tape, const AutoEncoder& model, const nd::Matrix& frames,
                               const nd::Matrix& conditioning, const DropoutPlan& plan,
                               bool rescale_kept) {
  TapedPass pass;
  for (const auto& p : model.parameters()) pass.params.push_back(tape.leaf(p.value));
  pass.input = tape.leaf(model.context_window(frames));
  nd::Var h = pass.input;
  const std::size_t layers = model.encoder_layers() + model.decoder_layers();
  for (std::size_t l = 0; l < model.encoder_layers(); ++l)
    h = nd::dense_forward(h, pass.params[2 * l], pass.params[2 * l + 1], model.activation(l));
  pass.codes = h;
  pass.masked = apply_bottleneck(h, plan, rescale_kept);
  pass.conditioning = tape.leaf(conditioning);
  h = nd::concat_cols(pass.masked, pass.conditioning);
  for (std::size_t l = model.encoder_layers(); l < layers; ++l)
    h = nd::dense_forward(h, pass.params[2 * l], pass.params[2 * l + 1], model.activation(l));
  pass.output = h;
  pass.loss = nd::mse_loss(h, frames);
  return pass;
}

/// Mutable training state: model (with Adam moments), update count and the
/// stream that seeds each step.
struct TrainState {
  AutoEncoder model;
  long step = 0;
  nd::Rng rng;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

inline TrainState init_training(const ModelConfig& mcfg, const TrainConfig& tcfg,
                                const GenParams& params) {
  tcfg.validate();
  if (mcfg.latent_size != tcfg.bottleneck.latent_size)
    throw ConfigError("model.latent_size (" + std::to_string(mcfg.latent_size) +
                      ") != bottleneck.latent_size (" +
                      std::to_string(tcfg.bottleneck.latent_size) + ")");
  if (mcfg.n_bins != params.n_bins)
    throw ConfigError("model.n_bins does not match the corpus (" + std::to_string(params.n_bins) +
                      ")");
  nd::Rng init_rng(nd::derive(tcfg.seed, "init"));
  return {AutoEncoder(mcfg, Conditioning::for_params(params), init_rng), 0,
          nd::Rng(nd::derive(tcfg.seed, "steps"))};
}

struct StepResult {
  double loss = 0.0;  // before the update
  PlanBranch branch = PlanBranch::PerFrame;
};

/// One update on one sample: plan, mask, decode with the true conditioning,
/// MSE, Adam.
inline StepResult train_step(TrainState& state, const Sample& sample, const TrainConfig& cfg,
                             nd::Rng& rng) {
  const DropoutPlan plan = make_plan(cfg.bottleneck, sample.frame_classes(), rng);
  const nd::Matrix y = state.model.conditioning().build(sample);
  nd::Tape tape;
  TapedPass pass = taped_forward(tape, state.model, sample.frames, y, plan,
                                 cfg.bottleneck.rescale_kept);
  const double loss = tape.value(pass.loss)[0];
  if (!std::isfinite(loss))
    throw TrainingError("non-finite loss at step " + std::to_string(state.step + 1));
  tape.backward(pass.loss);
  std::vector<nd::Matrix> grads;
  grads.reserve(pass.params.size());
  for (nd::Var v : pass.params) grads.push_back(tape.grad(v));
  try {
    nd::adam_step(state.model.parameters(), grads, state.step + 1, cfg.adam);
  } catch (const TrainingError& e) {
    throw TrainingError(std::string(e.what()) + " at step " + std::to_string(state.step + 1));
  }
  ++state.step;
  return {loss, plan.branch};
}

/// Contiguous window of at most `frames` frames starting at `start`.
inline Sample crop(const Sample& s, std::size_t start, std::size_t frames) {
  const std::size_t n = std::min(frames, s.length() - start);
  Sample out;
  out.voice_type = s.voice_type;
  out.high_pitch = s.high_pitch;
  out.frames = nd::Matrix(n, s.frames.cols());
  out.content = nd::Matrix(n, s.content.cols());
  for (std::size_t t = 0; t < n; ++t) {
    std::copy(s.frames.row(start + t).begin(), s.frames.row(start + t).end(), out.frames.row(t).begin());
    std::copy(s.content.row(start + t).begin(), s.content.row(start + t).end(), out.content.row(t).begin());
  }
  out.control.assign(s.control.begin() + static_cast<long>(start), s.control.begin() + static_cast<long>(start + n));
  out.voiced.assign(s.voiced.begin() + static_cast<long>(start), s.voiced.begin() + static_cast<long>(start + n));
  return out;
}

/// Draws this step's sample (and window) and runs train_step.
inline StepResult train_next(TrainState& state, const Corpus& corpus, const TrainConfig& cfg) {
  if (corpus.samples.empty()) throw TrainingError("training corpus is empty");
  nd::Rng step_rng(state.rng.next());
  const Sample& s = corpus.samples[step_rng.below(corpus.samples.size())];
  if (s.length() <= cfg.batch_frames) return train_step(state, s, cfg, step_rng);
  const std::size_t start = step_rng.below(s.length() - cfg.batch_frames + 1);
  return train_step(state, crop(s, start, cfg.batch_frames), cfg, step_rng);
}

/// Encode without dropout and decode with every voiced control shifted by
/// `offset_cents`; unvoiced frames keep conditioning (0, 0).
inline nd::Matrix transform(const AutoEncoder& model, const Sample& sample, double offset_cents) {
  detail::require_finite_weights(model, "transform");
  const nd::Matrix codes = encode(model, sample.frames);
  return decode(model, codes, model.conditioning().build(sample, offset_cents));
}

// ---------------------------------------------------------------------------
// Checkpoint container
//
//   "VASBCKPT" | u32 version | u64 header length | header JSON
//   u64 parameter count, then per parameter:
//     name (u64 length + bytes) | u64 rows | u64 cols | value | m | v  (f64)
//
// The header holds model/train configs, conditioning, update count, the
// step stream's xoshiro state and the corpus generator fingerprint.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainState state;
  TrainConfig train;
  std::uint64_t params_fingerprint = 0;
};

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const AutoEncoder& m = ck.state.model;
  io::Writer w(out);
  w.magic("VASBCKPT");
  w.u32(kCheckpointVersion);
  const auto& s = ck.state.rng.state();
  const nlohmann::json header = {
      {"format", "vasb-checkpoint"},
      {"version", kCheckpointVersion},
      {"model", m.config()},
      {"train", ck.train},
      {"conditioning", {m.conditioning().centre, m.conditioning().half_width}},
      {"step", ck.state.step},
      {"rng_state", {s[0], s[1], s[2], s[3]}},
      {"params_fingerprint", ck.params_fingerprint}};
  w.string(header.dump());
  w.u64(m.parameters().size());
  for (const auto& p : m.parameters()) {
    w.string(p.name);
    w.u64(p.value.rows());
    w.u64(p.value.cols());
    w.f64s(p.value.data());
    w.f64s(p.moments.m.data());
    w.f64s(p.moments.v.data());
  }
  w.check("checkpoint");
}

inline AutoEncoder read_model_body(io::Reader& r, const nlohmann::json& header) {
  AutoEncoder m;
  m.cfg_ = header.at("model").get<ModelConfig>();
  m.cfg_.validate();
  const auto cond = header.at("conditioning");
  m.cond_ = {cond.at(0).get<double>(), cond.at(1).get<double>()};
  m.encoder_layers_ = m.cfg_.encoder_hidden.size() + 1;
  const std::size_t expected = 2 * (m.encoder_layers_ + m.cfg_.decoder_hidden.size() + 1);
  const std::size_t n = r.u64();
  if (n != expected)
    throw CompatibilityError("checkpoint: " + std::to_string(n) + " tensors, config implies " +
                             std::to_string(expected));
  m.params_.resize(n);
  for (auto& p : m.params_) {
    p.name = r.string();
    const std::size_t rows = r.u64(), cols = r.u64();
    p.value = nd::Matrix(rows, cols, r.f64s(rows * cols));
    p.moments.m = nd::Matrix(rows, cols, r.f64s(rows * cols));
    p.moments.v = nd::Matrix(rows, cols, r.f64s(rows * cols));
  }
  return m;
}

inline Checkpoint read_checkpoint(std::istream& in) {
  io::Reader r(in, "checkpoint");
  r.magic("VASBCKPT");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CompatibilityError("checkpoint: unsupported version " + std::to_string(version));
  const nlohmann::json header = nlohmann::json::parse(r.string());
  Checkpoint ck;
  ck.train = header.at("train").get<TrainConfig>();
  ck.state.step = header.at("step").get<long>();
  const auto rs = header.at("rng_state");
  ck.state.rng.set_state({rs.at(0).get<std::uint64_t>(), rs.at(1).get<std::uint64_t>(),
                          rs.at(2).get<std::uint64_t>(), rs.at(3).get<std::uint64_t>()});
  ck.params_fingerprint = header.at("params_fingerprint").get<std::uint64_t>();
  ck.state.model = read_model_body(r, header);
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  io::write_file(path, [&](std::ostream& out) { write_checkpoint(out, ck); });
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace vasb
