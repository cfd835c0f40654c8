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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "vasb/errors.hpp"
#include "vasb/experiment.hpp"

namespace vasb {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("vasb_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  ExperimentConfig tiny(const std::string& run_id = "tiny") const {
    ExperimentConfig c;
    c.run_id = run_id;
    c.output_dir = dir_;
    c.corpus.mix = CorpusMix::Mixed;
    c.corpus.samples = 24;
    c.corpus.seed = 3;
    c.model.encoder_hidden = {12};
    c.model.decoder_hidden = {12};
    c.train.bottleneck.kind = BottleneckKind::Rabo;
    c.train.steps = 60;
    c.train.seed = 5;
    c.log_interval = 10;
    c.checkpoint_interval = 20;
    c.eval.samples = 16;
    c.eval.seed = 4;
    c.eval.options.discretization_sources = 4;
    return c;
  }

  fs::path dir_;
};

// ---------------------------------------------------------------------------
// Configuration

std::string config_error_of(const nlohmann::json& j) {
  try {
    parse_experiment_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.run_id = "abc";
  c.train.bottleneck.kind = BottleneckKind::Hibo;
  c.train.bottleneck.p_global = 0.3;
  c.eval.options.grid = {-100.0, 0.0, 100.0};
  const ExperimentConfig back = parse_experiment_config(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, FieldPathsInErrors) {
  const nlohmann::json base = {{"schema_version", 1}};
  EXPECT_EQ(config_error_of(base), "");
  auto with = [&](const nlohmann::json& patch) {
    nlohmann::json j = base;
    j.merge_patch(patch);
    return config_error_of(j);
  };
  EXPECT_NE(config_error_of(nlohmann::json::object()).find("schema_version"), std::string::npos);
  EXPECT_NE(with({{"schema_version", 2}}).find("schema_version"), std::string::npos);
  EXPECT_NE(with({{"train", {{"steps", "many"}}}}).find("train.steps"), std::string::npos);
  EXPECT_NE(with({{"train", {{"bottleneck", {{"kind", "GLOBO"}}}}}}).find("train.bottleneck"),
            std::string::npos);
  EXPECT_NE(with({{"train", {{"bottleneck", {{"speed", 1}}}}}}).find("train.bottleneck.speed"),
            std::string::npos);
  EXPECT_NE(with({{"corpus", {{"mix", "Choir"}}}}).find("corpus.mix"), std::string::npos);
  EXPECT_NE(with({{"corpus", {{"params", {{"noise_floor", -1.0}}}}}}).find("corpus.params"),
            std::string::npos);
  EXPECT_NE(with({{"model", {{"latent_size", 64}}}}).find("train.bottleneck.latent_size"),
            std::string::npos);
  EXPECT_NE(with({{"eval", {{"grid", {{"lo", 0}, {"hi", -1}, {"step", 100}}}}}}).find("eval.grid"),
            std::string::npos);
  EXPECT_NE(with({{"train", {{"checkpoint_interval", 7}}}}).find("train.checkpoint_interval"),
            std::string::npos);
  EXPECT_NE(with({{"run_id", "a/b"}}).find("run_id"), std::string::npos);
  EXPECT_NE(with({{"colour", "red"}}).find("colour"), std::string::npos);
}

TEST(Sweep, FullGridCollapsesNoboToFiftyFourCells) {
  SweepSpec spec;
  const auto cells = sweep_cells(spec);
  EXPECT_EQ(cells.size(), 54u);  // 2*2*4*3 dropout cells + 1*2*1*3 NOBO cells
  std::set<std::uint64_t> seeds;
  std::set<std::string> labels;
  for (const auto& c : cells) {
    seeds.insert(c.seed);
    labels.insert(c.label());
    if (c.kind == BottleneckKind::Nobo) { EXPECT_EQ(c.p_global, 0.0); }
  }
  EXPECT_EQ(seeds.size(), cells.size());
  EXPECT_EQ(labels.size(), cells.size());
}

TEST(Sweep, CellSeedsAreStable) {
  SweepSpec a, b;
  EXPECT_EQ(sweep_cells(a)[7].seed, sweep_cells(b)[7].seed);
  b.base.train.seed = 2;
  EXPECT_NE(sweep_cells(a)[7].seed, sweep_cells(b)[7].seed);
  EXPECT_EQ(cell_seed(1, BottleneckKind::Rabo, 16, 0.1, CorpusMix::Mixed),
            cell_seed(1, BottleneckKind::Rabo, 16, 0.1, CorpusMix::Mixed));
}

TEST(Sweep, SpecRejectsValuesOutsideDomains) {
  auto error_of = [](const nlohmann::json& axes) {
    try {
      parse_sweep_spec({{"schema_version", 1}, {"base", {{"schema_version", 1}}}, {"axes", axes}});
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_EQ(error_of({{"latent_size", {16, 64}}}), "");
  EXPECT_NE(error_of({{"latent_size", {16, 32}}}).find("axes.latent_size[1]"), std::string::npos);
  EXPECT_NE(error_of({{"p_global", {0.5}}}).find("axes.p_global[0]"), std::string::npos);
  EXPECT_NE(error_of({{"kind", {"RABO", "XBO"}}}).find("axes.kind[1]"), std::string::npos);
  EXPECT_NE(error_of({{"mix", nlohmann::json::array()}}).find("axes.mix"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Commands

TEST_F(TempDir, GenManifestAndByteIdenticalRerun) {
  ExperimentConfig c = tiny();
  c.corpus.samples = 2000;
  c.corpus.frames_per_sample = 4;
  const nlohmann::json m = cmd_gen(c);
  EXPECT_NEAR(m["train"]["speech_fraction"].get<double>(), 0.5, 0.015);
  const std::string first = slurp(c.run_dir() / "corpus_train.vasb");
  cmd_gen(c);
  EXPECT_EQ(slurp(c.run_dir() / "corpus_train.vasb"), first);

  ExperimentConfig singing = tiny("singing");
  singing.corpus.mix = CorpusMix::SingingOnly;
  singing.corpus.samples = 4000;
  singing.corpus.frames_per_sample = 4;
  const nlohmann::json ms = cmd_gen(singing);
  EXPECT_NEAR(ms["train"]["high_pitch_fraction"].get<double>(), 0.10, 0.015);
  EXPECT_EQ(ms["train"]["speech_fraction"].get<double>(), 0.0);
  EXPECT_TRUE(ms.contains("created_utc"));
}

TEST_F(TempDir, RunIdReuseWithDifferentConfigRejected) {
  ExperimentConfig c = tiny();
  cmd_gen(c);
  c.train.steps = 80;
  EXPECT_THROW(cmd_gen(c), ConfigError);
}

TEST_F(TempDir, TrainNeedsCorpus) {
  EXPECT_THROW(cmd_train(tiny()), IoError);
}

TEST_F(TempDir, TrainWritesTraceAndCheckpoints) {
  const ExperimentConfig c = tiny();
  cmd_gen(c);
  const TrainOutcome out = cmd_train(c);
  EXPECT_TRUE(out.finished);
  EXPECT_EQ(out.state.step, 60);
  std::ifstream trace(c.run_dir() / "loss_trace.tsv");
  std::size_t records = 0;
  for (std::string line; std::getline(trace, line);)
    if (!line.empty() && line[0] != '#' && line.rfind("step", 0) != 0) ++records;
  EXPECT_EQ(records, 6u);
  for (long s : {20, 40, 60}) EXPECT_TRUE(fs::exists(c.run_dir() / "checkpoints" / detail::checkpoint_name(s)));
  EXPECT_TRUE(fs::exists(c.run_dir() / "model.ckpt"));
}

TEST_F(TempDir, ResumeEqualsUninterruptedRunBitwise) {
  const ExperimentConfig straight = tiny("straight"), split = tiny("split");
  cmd_gen(straight);
  cmd_gen(split);
  cmd_train(straight);
  RunOptions stop;
  stop.stop_at = 30;
  EXPECT_THROW(cmd_train(split, RunOptions{false, 25, nullptr}), ConfigError);
  const TrainOutcome partial = cmd_train(split, stop);
  EXPECT_FALSE(partial.finished);
  EXPECT_FALSE(fs::exists(split.run_dir() / "model.ckpt"));
  RunOptions resume;
  resume.resume = true;
  const TrainOutcome rest = cmd_train(split, resume);
  EXPECT_TRUE(rest.finished);
  EXPECT_EQ(slurp(split.run_dir() / "model.ckpt"), slurp(straight.run_dir() / "model.ckpt"));
  EXPECT_EQ(slurp(split.run_dir() / "loss_trace.tsv"), slurp(straight.run_dir() / "loss_trace.tsv"));
}

TEST_F(TempDir, ResumeRejectsChangedConfiguration) {
  ExperimentConfig c = tiny();
  cmd_gen(c);
  cmd_train(c, RunOptions{false, 20, nullptr});
  fs::remove(c.run_dir() / "config.json");
  c.train.adam.lr = 5e-3;
  EXPECT_THROW(cmd_train(c, RunOptions{true, -1, nullptr}), CompatibilityError);
}

TEST_F(TempDir, EvalReportRowsAndDeterminism) {
  const ExperimentConfig c = tiny();
  EXPECT_THROW(cmd_eval(c), IoError);
  cmd_gen(c);
  cmd_train(c);
  const EvalReport r = cmd_eval(c);
  const std::string bytes = slurp(c.run_dir() / "report.tsv");
  std::size_t points = 0;
  std::istringstream in(bytes);
  for (std::string line; std::getline(in, line);) points += line.rfind("point\t", 0) == 0;
  EXPECT_EQ(points, c.eval.options.grid.size());
  cmd_eval(c);
  EXPECT_EQ(slurp(c.run_dir() / "report.tsv"), bytes);
  EXPECT_TRUE(fs::exists(c.run_dir() / "plot.tsv"));
  EXPECT_EQ(r.curve.size(), c.eval.options.grid.size());
}

TEST_F(TempDir, InMemoryRunMatchesFileCommands) {
  const ExperimentConfig c = tiny();
  cmd_gen(c);
  cmd_train(c);
  const EvalReport files = cmd_eval(c);
  const RunResult mem = run_experiment(c);
  std::stringstream a, b;
  write_report(a, files);
  write_report(b, mem.report);
  EXPECT_EQ(a.str(), b.str());
}

TEST_F(TempDir, EvalRejectsForeignCheckpoint) {
  const ExperimentConfig c = tiny();
  cmd_gen(c);
  cmd_train(c);
  ExperimentConfig other = tiny("other");
  other.corpus.params.noise_floor = 0.02;
  cmd_gen(other);
  EXPECT_THROW(cmd_eval(other, {}, c.run_dir() / "model.ckpt"), CompatibilityError);
}

TEST_F(TempDir, SweepParallelMatchesSerialAndRecordsFailures) {
  SweepSpec spec;
  spec.base = tiny();
  spec.base.train.steps = 20;
  spec.axes.kinds = {BottleneckKind::Nobo, BottleneckKind::Rabo};
  spec.axes.latent_sizes = {16};
  spec.axes.p_globals = {0.0, 0.1};
  spec.axes.mixes = {CorpusMix::SingingOnly};
  const auto serial = cmd_sweep(spec, dir_ / "serial", 1);
  const auto parallel = cmd_sweep(spec, dir_ / "parallel", 3);
  ASSERT_EQ(serial.size(), 3u);
  const std::string summary = slurp(dir_ / "serial" / "summary.tsv");
  EXPECT_EQ(summary, slurp(dir_ / "parallel" / "summary.tsv"));
  std::size_t rows = 0;
  std::istringstream in(summary);
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 4u);
  for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_TRUE(serial[i].ok) << serial[i].error;

  spec.base.eval.samples = 1;  // too few frames for the leakage probe
  const auto failed = cmd_sweep(spec, dir_ / "failing", 2);
  for (const auto& r : failed) EXPECT_FALSE(r.ok);
  EXPECT_NE(slurp(dir_ / "failing" / "summary.tsv").find("failed"), std::string::npos);
}

TEST_F(TempDir, ReportTableFromTwoRuns) {
  ExperimentConfig a = tiny("a"), b = tiny("b");
  b.train.bottleneck.kind = BottleneckKind::Nobo;
  for (const auto& c : {a, b}) {
    cmd_gen(c);
    cmd_train(c);
    cmd_eval(c);
  }
  const std::string table = cmd_report({a.run_dir() / "report.tsv", b.run_dir() / "report.tsv"});
  std::istringstream in(table);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("report\terr_-1600\terr_-800\terr_0\terr_800\terr_1600", 0), 0u);
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 2u);
  EXPECT_THROW(cmd_report({dir_ / "missing.tsv"}), IoError);
}

// ---------------------------------------------------------------------------
// Command-line binary

int run_cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string(VASB_CLI_PATH) + " " + args + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(TempDir, CliEndToEndAndErrorRecords) {
  const ExperimentConfig c = tiny();
  {
    std::ofstream out(dir_ / "run.json");
    out << to_json(c).dump(2);
  }
  const fs::path err = dir_ / "stderr.txt";
  const std::string cfg = "--config " + (dir_ / "run.json").string();
  EXPECT_EQ(run_cli("gen " + cfg, err), 0);
  EXPECT_EQ(run_cli("train " + cfg, err), 0);
  EXPECT_EQ(run_cli("eval " + cfg, err), 0);
  EXPECT_TRUE(fs::exists(c.run_dir() / "report.tsv"));
  EXPECT_EQ(run_cli("report --output " + (dir_ / "t.tsv").string() + " " +
                        (c.run_dir() / "report.tsv").string(), err),
            0);
  EXPECT_TRUE(fs::exists(dir_ / "t.tsv"));

  EXPECT_EQ(run_cli("gen --config " + (dir_ / "nope.json").string(), err), 3);
  const auto record = nlohmann::json::parse(slurp(err));
  EXPECT_EQ(record["error"]["kind"], "io");
  {
    std::ofstream out(dir_ / "bad.json");
    out << R"({"schema_version": 1, "train": {"steps": -5}})";
  }
  EXPECT_EQ(run_cli("train --config " + (dir_ / "bad.json").string(), err), 2);
  const auto bad = nlohmann::json::parse(slurp(err));
  EXPECT_EQ(bad["error"]["kind"], "config");
  EXPECT_NE(bad["error"]["message"].get<std::string>().find("train.steps"), std::string::npos);
  EXPECT_NE(run_cli("frobnicate", err), 0);
}

}  // namespace
}  // namespace vasb
