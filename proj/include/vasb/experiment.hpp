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

// Experiment runner: configuration, corpus generation, training with
// checkpoints and resume, evaluation, sweeps and comparison tables.
//
// A run lives in <output_dir>/<run_id>/:
//
//   config.json                resolved configuration
//   manifest.json              seeds and corpus statistics (only file with a timestamp)
//   corpus_train.vasb, corpus_eval.vasb
//   loss_trace.tsv             step, mean loss and GLOBO share per logging interval
//   checkpoints/step_<n>.ckpt  periodic checkpoints
//   model.ckpt                 final checkpoint
//   report.tsv, plot.tsv       evaluation outputs

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vasb/bottleneck.hpp"
#include "vasb/errors.hpp"
#include "vasb/eval.hpp"
#include "vasb/io.hpp"
#include "vasb/model.hpp"
#include "vasb/ndcore/rng.hpp"
#include "vasb/synthdata.hpp"

namespace vasb {

inline constexpr int kConfigSchemaVersion = 1;

struct CorpusSpec {
  GenParams params;
  CorpusMix mix = CorpusMix::SingingOnly;
  std::size_t samples = 512;
  std::size_t frames_per_sample = 32;
  std::uint64_t seed = 101;

  friend bool operator==(const CorpusSpec&, const CorpusSpec&) = default;
};

struct EvalSpec {
  std::uint64_t seed = 901;
  std::size_t samples = 48;
  EvalOptions options;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string run_id = "run";
  std::filesystem::path output_dir = "runs";
  CorpusSpec corpus;
  ModelConfig model;
  TrainConfig train;
  long log_interval = 500;
  long checkpoint_interval = 5000;
  EvalSpec eval;

  std::filesystem::path run_dir() const { return output_dir / run_id; }

  void validate() const;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

inline void require_object(const nlohmann::json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) config_error(path.empty() ? key : path + "." + key, "unknown field");
  }
}

/// Reads `j[key]` into `out` if present, reporting type errors by path.
template <class T>
void read_field(const nlohmann::json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  const std::string where = path.empty() ? key : path + "." + key;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception& e) {
    config_error(where, std::string("invalid value (") + e.what() + ")");
  } catch (const ConfigError& e) {
    config_error(where, e.what());
  }
}

inline bool is_run_id(const std::string& s) {
  if (s.empty() || s == "." || s == "..") return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    detail::config_error("schema_version", "unsupported version " + std::to_string(schema_version));
  if (!detail::is_run_id(run_id))
    detail::config_error("run_id", "use letters, digits, '_', '-' or '.'");
  if (output_dir.empty()) detail::config_error("output_dir", "must not be empty");
  try {
    corpus.params.validate();
  } catch (const Error& e) {
    detail::config_error("corpus.params", e.what());
  }
  if (corpus.samples == 0) detail::config_error("corpus.samples", "must be >= 1");
  if (corpus.frames_per_sample == 0) detail::config_error("corpus.frames_per_sample", "must be >= 1");
  model.validate();
  train.validate();
  if (model.latent_size != train.bottleneck.latent_size)
    detail::config_error("train.bottleneck.latent_size",
                         "must equal model.latent_size (" + std::to_string(model.latent_size) + ")");
  if (model.n_bins != corpus.params.n_bins)
    detail::config_error("model.n_bins",
                         "must equal corpus.params.n_bins (" + std::to_string(corpus.params.n_bins) + ")");
  if (log_interval < 1) detail::config_error("train.log_interval", "must be >= 1");
  if (checkpoint_interval < 1 || checkpoint_interval % log_interval != 0)
    detail::config_error("train.checkpoint_interval", "must be a positive multiple of log_interval");
  if (eval.samples == 0) detail::config_error("eval.samples", "must be >= 1");
  if (eval.options.grid.empty()) detail::config_error("eval.grid", "must not be empty");
  for (double g : eval.options.grid)
    if (!std::isfinite(g)) detail::config_error("eval.grid", "offsets must be finite");
  if (!(eval.options.window_cents > 0.0)) detail::config_error("eval.window_cents", "must be > 0");
  if (!(eval.options.discretization_step > 0.0))
    detail::config_error("eval.discretization_step", "must be > 0");
  if (!(eval.options.target_bin_width > 0.0))
    detail::config_error("eval.target_bin_width", "must be > 0");
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json train = c.train;
  train["log_interval"] = c.log_interval;
  train["checkpoint_interval"] = c.checkpoint_interval;
  const EvalOptions& e = c.eval.options;
  return {{"schema_version", c.schema_version},
          {"run_id", c.run_id},
          {"output_dir", c.output_dir.generic_string()},
          {"corpus",
           {{"params", c.corpus.params},
            {"mix", to_string(c.corpus.mix)},
            {"samples", c.corpus.samples},
            {"frames_per_sample", c.corpus.frames_per_sample},
            {"seed", c.corpus.seed}}},
          {"model", c.model},
          {"train", train},
          {"eval",
           {{"seed", c.eval.seed},
            {"samples", c.eval.samples},
            {"grid", e.grid},
            {"window_cents", e.window_cents},
            {"slope_threshold", e.slope_threshold},
            {"discretization_min_offset", e.discretization_min_offset},
            {"discretization_step", e.discretization_step},
            {"discretization_sources", e.discretization_sources},
            {"target_bin_width", e.target_bin_width}}}};
}

/// Parses and validates an experiment configuration. Missing fields keep
/// their defaults; unknown fields and bad values are rejected with the
/// offending field path.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using detail::read_field;
  ExperimentConfig c;
  detail::require_object(j, "", {"schema_version", "run_id", "output_dir", "corpus", "model",
                                 "train", "eval"});
  if (!j.contains("schema_version")) detail::config_error("schema_version", "required");
  read_field(j, "", "schema_version", c.schema_version);
  read_field(j, "", "run_id", c.run_id);
  std::string out = c.output_dir.string();
  read_field(j, "", "output_dir", out);
  c.output_dir = out;

  if (j.contains("corpus")) {
    const auto& cj = j.at("corpus");
    detail::require_object(cj, "corpus", {"params", "mix", "samples", "frames_per_sample", "seed"});
    read_field(cj, "corpus", "params", c.corpus.params);
    std::string mix(to_string(c.corpus.mix));
    read_field(cj, "corpus", "mix", mix);
    try {
      c.corpus.mix = parse_corpus_mix(mix);
    } catch (const ConfigError& e) {
      detail::config_error("corpus.mix", e.what());
    }
    read_field(cj, "corpus", "samples", c.corpus.samples);
    read_field(cj, "corpus", "frames_per_sample", c.corpus.frames_per_sample);
    read_field(cj, "corpus", "seed", c.corpus.seed);
  }
  if (j.contains("model")) {
    detail::require_object(j.at("model"), "model",
                           {"n_bins", "latent_size", "context", "encoder_hidden", "decoder_hidden"});
    const auto& mj = j.at("model");
    read_field(mj, "model", "n_bins", c.model.n_bins);
    read_field(mj, "model", "latent_size", c.model.latent_size);
    read_field(mj, "model", "context", c.model.context);
    read_field(mj, "model", "encoder_hidden", c.model.encoder_hidden);
    read_field(mj, "model", "decoder_hidden", c.model.decoder_hidden);
  }
  if (j.contains("train")) {
    const auto& tj = j.at("train");
    detail::require_object(tj, "train", {"bottleneck", "lr", "beta1", "beta2", "eps", "steps",
                                         "batch_frames", "seed", "log_interval",
                                         "checkpoint_interval"});
    if (tj.contains("bottleneck"))
      detail::require_object(tj.at("bottleneck"), "train.bottleneck",
                             {"kind", "latent_size", "target_size", "p_global", "rescale_kept"});
    if (tj.contains("bottleneck")) {
      const auto& bj = tj.at("bottleneck");
      BottleneckConfig& b = c.train.bottleneck;
      if (bj.contains("kind")) {
        std::string kind;
        read_field(bj, "train.bottleneck", "kind", kind);
        try {
          b.kind = parse_bottleneck_kind(kind);
        } catch (const ConfigError& e) {
          detail::config_error("train.bottleneck.kind", e.what());
        }
      }
      read_field(bj, "train.bottleneck", "latent_size", b.latent_size);
      read_field(bj, "train.bottleneck", "p_global", b.p_global);
      read_field(bj, "train.bottleneck", "rescale_kept", b.rescale_kept);
      if (bj.contains("target_size")) {
        BottleneckConfig sizes;
        read_field(tj, "train", "bottleneck", sizes);
        b.target_size = sizes.target_size;
      }
    }
    read_field(tj, "train", "lr", c.train.adam.lr);
    read_field(tj, "train", "beta1", c.train.adam.beta1);
    read_field(tj, "train", "beta2", c.train.adam.beta2);
    read_field(tj, "train", "eps", c.train.adam.eps);
    read_field(tj, "train", "steps", c.train.steps);
    read_field(tj, "train", "batch_frames", c.train.batch_frames);
    read_field(tj, "train", "seed", c.train.seed);
    read_field(tj, "train", "log_interval", c.log_interval);
    read_field(tj, "train", "checkpoint_interval", c.checkpoint_interval);
  }
  if (j.contains("eval")) {
    const auto& ej = j.at("eval");
    detail::require_object(ej, "eval", {"seed", "samples", "grid", "window_cents",
                                        "slope_threshold", "discretization_min_offset",
                                        "discretization_step", "discretization_sources",
                                        "target_bin_width"});
    EvalOptions& o = c.eval.options;
    read_field(ej, "eval", "seed", c.eval.seed);
    read_field(ej, "eval", "samples", c.eval.samples);
    if (ej.contains("grid")) {
      const auto& g = ej.at("grid");
      if (g.is_object()) {
        detail::require_object(g, "eval.grid", {"lo", "hi", "step"});
        double lo = 0, hi = 0, step = 0;
        read_field(g, "eval.grid", "lo", lo);
        read_field(g, "eval.grid", "hi", hi);
        read_field(g, "eval.grid", "step", step);
        if (!(step > 0.0) || !(hi >= lo)) detail::config_error("eval.grid", "need lo <= hi and step > 0");
        o.grid = offset_grid(lo, hi, step);
      } else {
        read_field(ej, "eval", "grid", o.grid);
      }
    }
    read_field(ej, "eval", "window_cents", o.window_cents);
    read_field(ej, "eval", "slope_threshold", o.slope_threshold);
    read_field(ej, "eval", "discretization_min_offset", o.discretization_min_offset);
    read_field(ej, "eval", "discretization_step", o.discretization_step);
    read_field(ej, "eval", "discretization_sources", o.discretization_sources);
    read_field(ej, "eval", "target_bin_width", o.target_bin_width);
  }
  c.validate();
  return c;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Run plumbing

struct RunOptions {
  bool resume = false;
  long stop_at = -1;           // stop (with a checkpoint) after this many steps; -1 runs to the end
  std::ostream* log = nullptr;  // progress messages
};

namespace detail {

inline void log_line(const RunOptions& opt, const std::string& msg) {
  if (!opt.log) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  *opt.log << msg << '\n' << std::flush;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create directory '" + dir.string() + "'" +
                  (ec ? ": " + ec.message() : std::string()));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  io::write_file(path, [&](std::ostream& out) { out << text; }, false);
}

/// Records the resolved configuration; a run_id already used with a
/// different configuration is rejected.
inline void claim_run_dir(const ExperimentConfig& c) {
  const auto dir = c.run_dir();
  ensure_dir(dir);
  const auto path = dir / "config.json";
  const std::string text = to_json(c).dump(2) + "\n";
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::stringstream old;
    old << in.rdbuf();
    if (old.str() != text)
      config_error("run_id", "'" + c.run_id + "' already used in '" + c.output_dir.string() +
                                 "' with a different configuration");
    return;
  }
  write_text(path, text);
}

inline std::string checkpoint_name(long step) {
  std::ostringstream s;
  s << "step_" << std::setw(9) << std::setfill('0') << step << ".ckpt";
  return s.str();
}

inline nlohmann::json stats_json(const Corpus& c) {
  const CorpusStats s = corpus_stats(c);
  return {{"seed", c.seed},
          {"mix", to_string(c.mix)},
          {"samples", s.samples},
          {"frames", s.frames},
          {"speech_fraction", s.speech_fraction},
          {"high_pitch_fraction", s.high_pitch_fraction},
          {"voiced_fraction", s.voiced_fraction}};
}

}  // namespace detail

inline Corpus make_train_corpus(const ExperimentConfig& c) {
  return generate_corpus(c.corpus.mix, c.corpus.samples, c.corpus.frames_per_sample,
                         c.corpus.params, c.corpus.seed);
}

inline Corpus make_eval_corpus(const ExperimentConfig& c) {
  return generate_corpus(c.corpus.mix, c.eval.samples, c.corpus.frames_per_sample,
                         c.corpus.params, c.eval.seed);
}

/// Generates and stores the training and evaluation corpora plus a manifest.
inline nlohmann::json cmd_gen(const ExperimentConfig& c, const RunOptions& opt = {}) {
  c.validate();
  detail::claim_run_dir(c);
  const auto dir = c.run_dir();
  const Corpus train = make_train_corpus(c);
  const Corpus eval = make_eval_corpus(c);
  save_corpus(dir / "corpus_train.vasb", train);
  save_corpus(dir / "corpus_eval.vasb", eval);
  const nlohmann::json manifest = {{"format", "vasb-manifest"},
                                   {"run_id", c.run_id},
                                   {"created_utc", detail::utc_timestamp()},
                                   {"params_fingerprint", hex64(fingerprint(c.corpus.params))},
                                   {"train", detail::stats_json(train)},
                                   {"eval", detail::stats_json(eval)}};
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  detail::log_line(opt, "gen: " + std::to_string(train.samples.size()) + " training and " +
                            std::to_string(eval.samples.size()) + " evaluation samples in " +
                            dir.string());
  return manifest;
}

inline Corpus load_run_corpus(const ExperimentConfig& c, const char* which) {
  const auto path = c.run_dir() / (std::string("corpus_") + which + ".vasb");
  if (!std::filesystem::exists(path))
    throw IoError("missing corpus '" + path.string() + "' (run gen first)");
  Corpus corpus = load_corpus(path);
  if (fingerprint(corpus.params) != fingerprint(c.corpus.params))
    throw CompatibilityError("corpus '" + path.string() +
                             "' was generated with different generator settings");
  return corpus;
}

namespace detail {

/// Loss-trace accumulator over one logging interval.
struct TraceWindow {
  double loss = 0.0;
  long steps = 0, global = 0;

  void add(const StepResult& r) {
    loss += r.loss;
    ++steps;
    global += r.branch == PlanBranch::PerFrame ? 0 : 1;
  }
  std::string line(long step) const {
    return std::to_string(step) + '\t' + format_number(loss / static_cast<double>(steps)) + '\t' +
           format_number(static_cast<double>(global) / static_cast<double>(steps)) + '\n';
  }
};

inline constexpr const char* kTraceHeader = "# vasb-loss-trace version=1\nstep\tmean_loss\tglobal_fraction\n";

/// Trace records up to and including `step`.
inline std::string trace_prefix(const std::filesystem::path& path, long step) {
  std::string out = kTraceHeader;
  std::ifstream in(path);
  if (!in) throw IoError("cannot resume: missing loss trace '" + path.string() + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("step", 0) == 0) continue;
    if (std::stol(line.substr(0, line.find('\t'))) > step) break;
    out += line + '\n';
  }
  return out;
}

inline std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) return std::nullopt;
  std::optional<std::filesystem::path> best;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("step_", 0) != 0 || e.path().extension() != ".ckpt") continue;
    if (!best || name > best->filename().string()) best = e.path();
  }
  return best;
}

}  // namespace detail

struct TrainOutcome {
  TrainState state;
  double seconds = 0.0;
  bool finished = false;
};

/// Trains on the run's stored corpus, writing periodic checkpoints and the
/// loss trace. With `resume`, continues from the newest checkpoint; the
/// result is bitwise identical to an uninterrupted run.
inline TrainOutcome cmd_train(const ExperimentConfig& c, const RunOptions& opt = {}) {
  c.validate();
  if (opt.stop_at >= 0 && opt.stop_at % c.log_interval != 0)
    throw ConfigError("stop_at: must be a multiple of train.log_interval");
  detail::claim_run_dir(c);
  const auto dir = c.run_dir();
  const Corpus corpus = load_run_corpus(c, "train");
  const auto ck_dir = dir / "checkpoints";
  detail::ensure_dir(ck_dir);
  const auto trace_path = dir / "loss_trace.tsv";

  TrainOutcome out{init_training(c.model, c.train, corpus.params), 0.0, false};
  std::string trace = detail::kTraceHeader;
  if (opt.resume) {
    if (const auto latest = detail::latest_checkpoint(ck_dir)) {
      Checkpoint ck = load_checkpoint(*latest);
      if (ck.params_fingerprint != fingerprint(corpus.params))
        throw CompatibilityError("checkpoint '" + latest->string() + "' belongs to another corpus");
      if (nlohmann::json(ck.train) != nlohmann::json(c.train) ||
          !(ck.state.model.config() == c.model))
        throw CompatibilityError("checkpoint '" + latest->string() +
                                 "' was trained with a different configuration");
      out.state = std::move(ck.state);
      trace = detail::trace_prefix(trace_path, out.state.step);
      detail::log_line(opt, "train: resuming at step " + std::to_string(out.state.step));
    } else {
      detail::log_line(opt, "train: no checkpoint to resume from, starting fresh");
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  detail::TraceWindow window;
  const long end = opt.stop_at >= 0 ? std::min(opt.stop_at, c.train.steps) : c.train.steps;
  while (out.state.step < end) {
    window.add(train_next(out.state, corpus, c.train));
    const long s = out.state.step;
    if (s % c.log_interval == 0 || s == c.train.steps) {
      trace += window.line(s);
      detail::log_line(opt, "train: step " + std::to_string(s) + " loss " +
                                format_number(window.loss / static_cast<double>(window.steps)));
      window = {};
    }
    if (s % c.checkpoint_interval == 0 || s == end) {
      save_checkpoint(ck_dir / detail::checkpoint_name(s),
                      Checkpoint{out.state, c.train, fingerprint(corpus.params)});
      detail::write_text(trace_path, trace);
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail::write_text(trace_path, trace);
  out.finished = out.state.step == c.train.steps;
  if (out.finished) {
    save_checkpoint(dir / "model.ckpt", Checkpoint{out.state, c.train, fingerprint(corpus.params)});
    if (c.train.bottleneck.kind == BottleneckKind::Nobo && out.seconds > 300.0)
      detail::log_line(opt, "warning: NOBO training took " + format_number(std::round(out.seconds)) +
                                " s, above the 5 minute desk budget");
  }
  return out;
}

/// Evaluates the run's final checkpoint (or `checkpoint` when given) on the
/// stored evaluation corpus and writes report.tsv and plot.tsv.
inline EvalReport cmd_eval(const ExperimentConfig& c, const RunOptions& opt = {},
                           const std::optional<std::filesystem::path>& checkpoint = std::nullopt) {
  c.validate();
  const auto dir = c.run_dir();
  const auto ck_path = checkpoint.value_or(dir / "model.ckpt");
  if (!std::filesystem::exists(ck_path))
    throw IoError("missing checkpoint '" + ck_path.string() + "' (run train first)");
  const Checkpoint ck = load_checkpoint(ck_path);
  const Corpus corpus = load_run_corpus(c, "eval");
  if (ck.params_fingerprint != fingerprint(corpus.params))
    throw CompatibilityError("checkpoint '" + ck_path.string() + "' (corpus fingerprint " +
                             hex64(ck.params_fingerprint) + ") does not match the evaluation corpus (" +
                             hex64(fingerprint(corpus.params)) + ")");
  const EvalReport report = evaluate(ck.state.model, corpus, c.eval.options);
  io::write_file(dir / "report.tsv", [&](std::ostream& o) { write_report(o, report); }, false);
  io::write_file(dir / "plot.tsv", [&](std::ostream& o) { write_plot_data(o, report); }, false);
  detail::log_line(opt, "eval: wrote " + (dir / "report.tsv").string());
  return report;
}

/// In-memory gen + train + eval with the same seeds as the file-based
/// commands.
struct RunResult {
  TrainState state;
  EvalReport report;
};

inline RunResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  const Corpus train = make_train_corpus(c);
  const Corpus eval = make_eval_corpus(c);
  RunResult r{init_training(c.model, c.train, train.params), {}};
  while (r.state.step < c.train.steps) train_next(r.state, train, c.train);
  r.report = evaluate(r.state.model, eval, c.eval.options);
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

inline const std::vector<double>& sweep_offsets() {
  static const std::vector<double> k = {-1600.0, -800.0, 0.0, 800.0, 1600.0};
  return k;
}

struct SweepAxes {
  std::vector<BottleneckKind> kinds = {BottleneckKind::Nobo, BottleneckKind::Rabo,
                                       BottleneckKind::Hibo};
  std::vector<std::size_t> latent_sizes = {16, 64};
  std::vector<double> p_globals = {0.0, 0.1, 0.2, 0.3};
  std::vector<CorpusMix> mixes = {CorpusMix::SpeechOnly, CorpusMix::SingingOnly, CorpusMix::Mixed};
};

struct SweepSpec {
  SweepAxes axes;
  ExperimentConfig base;
};

struct SweepCell {
  BottleneckKind kind;
  std::size_t latent_size;
  double p_global;
  CorpusMix mix;
  std::uint64_t seed;

  std::string label() const {
    return std::string(to_string(kind)) + "_nl" + std::to_string(latent_size) + "_pg" +
           format_number(p_global) + "_" + std::string(to_string(mix));
  }
};

/// Stable per-cell seed from the base training seed and the coordinates.
inline std::uint64_t cell_seed(std::uint64_t base, BottleneckKind kind, std::size_t n_l,
                               double p_g, CorpusMix mix) {
  return nd::derive(base, "kind=" + std::string(to_string(kind)) + ";n_l=" + std::to_string(n_l) +
                              ";p_g=" + format_number(p_g) + ";mix=" + std::string(to_string(mix)));
}

/// Cartesian product of the axes with NOBO cells collapsed to p_g = 0
/// (NOBO has no dropout for the global branch to replace).
inline std::vector<SweepCell> sweep_cells(const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  std::set<std::string> seen;
  for (BottleneckKind k : spec.axes.kinds)
    for (std::size_t nl : spec.axes.latent_sizes)
      for (double pg : spec.axes.p_globals)
        for (CorpusMix mix : spec.axes.mixes) {
          const double p = k == BottleneckKind::Nobo ? 0.0 : pg;
          SweepCell cell{k, nl, p, mix, cell_seed(spec.base.train.seed, k, nl, p, mix)};
          if (seen.insert(cell.label()).second) cells.push_back(cell);
        }
  return cells;
}

inline ExperimentConfig cell_config(const SweepSpec& spec, const SweepCell& cell,
                                    const std::filesystem::path& sweep_dir) {
  ExperimentConfig c = spec.base;
  c.run_id = cell.label();
  c.output_dir = sweep_dir / "cells";
  c.corpus.mix = cell.mix;
  c.model.latent_size = cell.latent_size;
  c.train.bottleneck.kind = cell.kind;
  c.train.bottleneck.latent_size = cell.latent_size;
  c.train.bottleneck.p_global = cell.p_global;
  c.train.seed = cell.seed;
  return c;
}

inline SweepSpec parse_sweep_spec(const nlohmann::json& j) {
  detail::require_object(j, "", {"schema_version", "base", "axes"});
  if (!j.contains("schema_version")) detail::config_error("schema_version", "required");
  int version = 0;
  detail::read_field(j, "", "schema_version", version);
  if (version != kConfigSchemaVersion)
    detail::config_error("schema_version", "unsupported version " + std::to_string(version));
  SweepSpec s;
  if (!j.contains("base")) detail::config_error("base", "required");
  try {
    s.base = parse_experiment_config(j.at("base"));
  } catch (const ConfigError& e) {
    throw ConfigError("base." + std::string(e.what()));
  }
  if (!j.contains("axes")) return s;
  const auto& a = j.at("axes");
  detail::require_object(a, "axes", {"kind", "latent_size", "p_global", "mix"});
  auto parse_list = [&](const char* key, auto& out, auto parse) {
    if (!a.contains(key)) return;
    const std::string path = std::string("axes.") + key;
    const auto& arr = a.at(key);
    if (!arr.is_array() || arr.empty()) detail::config_error(path, "expected a non-empty list");
    out.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = path + "[" + std::to_string(i) + "]";
      try {
        out.push_back(parse(arr[i], where));
      } catch (const nlohmann::json::exception& e) {
        detail::config_error(where, std::string("invalid value (") + e.what() + ")");
      }
    }
  };
  parse_list("kind", s.axes.kinds, [](const nlohmann::json& v, const std::string& where) {
    try {
      return parse_bottleneck_kind(v.get<std::string>());
    } catch (const ConfigError& e) {
      detail::config_error(where, e.what());
    }
  });
  parse_list("latent_size", s.axes.latent_sizes, [](const nlohmann::json& v, const std::string& where) {
    const auto n = v.get<std::size_t>();
    if (n != 16 && n != 64) detail::config_error(where, "must be 16 or 64");
    return n;
  });
  parse_list("p_global", s.axes.p_globals, [](const nlohmann::json& v, const std::string& where) {
    const auto p = v.get<double>();
    for (double ok : {0.0, 0.1, 0.2, 0.3})
      if (p == ok) return p;
    detail::config_error(where, "must be one of 0.0, 0.1, 0.2, 0.3");
  });
  parse_list("mix", s.axes.mixes, [](const nlohmann::json& v, const std::string& where) {
    try {
      return parse_corpus_mix(v.get<std::string>());
    } catch (const ConfigError& e) {
      detail::config_error(where, e.what());
    }
  });
  return s;
}

inline SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  return parse_sweep_spec(read_json_file(path));
}

struct CellOutcome {
  SweepCell cell;
  bool ok = false;
  EvalReport report;
  std::string error;
};

inline std::string summary_header() {
  std::string h = "cell\tkind\tlatent_size\tp_global\tmix\tseed\tstatus";
  for (double o : sweep_offsets()) h += "\terr_" + format_number(o);
  return h + "\tleakage_r2\tleakage_r2_linear\tdiscretization_index\trecon_mse\terror\n";
}

inline std::string summary_row(const CellOutcome& c) {
  std::ostringstream s;
  s << c.cell.label() << '\t' << to_string(c.cell.kind) << '\t' << c.cell.latent_size << '\t'
    << format_number(c.cell.p_global) << '\t' << to_string(c.cell.mix) << '\t' << c.cell.seed
    << '\t' << (c.ok ? "ok" : "failed");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double o : sweep_offsets()) s << '\t' << format_number(c.ok ? c.report.curve.at(o) : nan);
  s << '\t' << format_number(c.ok ? c.report.leakage_r2 : nan) << '\t'
    << format_number(c.ok ? c.report.leakage_r2_linear : nan) << '\t'
    << format_number(c.ok ? c.report.discretization_index : nan) << '\t'
    << format_number(c.ok ? c.report.recon_mse : nan) << '\t';
  std::string err = c.error.empty() ? "-" : c.error;
  std::replace_if(err.begin(), err.end(), [](char ch) { return ch == '\t' || ch == '\n'; }, ' ');
  s << err << '\n';
  return s.str();
}

/// Runs every cell (gen, train, eval) on `workers` threads. Each cell owns
/// its directory; failures are recorded and the sweep continues. The
/// summary is written once all cells are done.
inline std::vector<CellOutcome> cmd_sweep(const SweepSpec& spec, const std::filesystem::path& sweep_dir,
                                          std::size_t workers, const RunOptions& opt = {}) {
  if (workers == 0) throw ConfigError("workers: must be >= 1");
  const std::vector<SweepCell> cells = sweep_cells(spec);
  for (const SweepCell& cell : cells) cell_config(spec, cell, sweep_dir).validate();
  detail::ensure_dir(sweep_dir);
  detail::log_line(opt, "sweep: " + std::to_string(cells.size()) + " cells on " +
                            std::to_string(workers) + " worker(s)");

  std::vector<CellOutcome> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      CellOutcome& r = results[i];
      r.cell = cells[i];
      try {
        const ExperimentConfig c = cell_config(spec, cells[i], sweep_dir);
        RunOptions cell_opt = opt;
        cell_opt.resume = false;
        cmd_gen(c, cell_opt);
        cmd_train(c, cell_opt);
        r.report = cmd_eval(c, cell_opt);
        r.ok = true;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      detail::log_line(opt, "sweep: " + r.cell.label() + (r.ok ? " done" : " failed: " + r.error));
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, cells.size()); ++w) pool.emplace_back(worker);
  }
  std::string text = summary_header();
  for (const CellOutcome& r : results) text += summary_row(r);
  detail::write_text(sweep_dir / "summary.tsv", text);
  return results;
}

// ---------------------------------------------------------------------------
// Comparison table

/// One row per report: errors at the sweep offsets and the summary metrics.
inline std::string cmd_report(const std::vector<std::filesystem::path>& reports) {
  if (reports.empty()) throw ConfigError("report: no input reports");
  std::string out = "report";
  for (double o : sweep_offsets()) out += "\terr_" + format_number(o);
  out += "\tleakage_r2\tleakage_r2_linear\tdiscretization_index\trecon_mse\n";
  for (const auto& path : reports) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report '" + path.string() + "'");
    const EvalReport r = read_report(in);
    out += path.generic_string();
    for (double o : sweep_offsets()) out += '\t' + format_number(r.curve.at(o));
    out += '\t' + format_number(r.leakage_r2) + '\t' + format_number(r.leakage_r2_linear) + '\t' +
           format_number(r.discretization_index) + '\t' + format_number(r.recon_mse) + '\n';
  }
  return out;
}

}  // namespace vasb
