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

// Command-line front end:
//
//   vasb gen    --config run.json [--output DIR] [--seed N]
//   vasb train  --config run.json [--output DIR] [--seed N] [--resume]
//   vasb eval   --config run.json [--output DIR] [--seed N] [--checkpoint PATH]
//   vasb sweep  --config sweep.json --output DIR [--workers N] [--seed N]
//   vasb report --output table.tsv REPORT...
//
// --seed overrides train.seed (the sweep's base seed). On failure a JSON
// error record is printed to stderr and the exit code is nonzero.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vasb/experiment.hpp"

namespace {

int exit_code(const std::string& kind) {
  if (kind == "config") return 2;
  if (kind == "io") return 3;
  if (kind == "compatibility") return 4;
  return 1;
}

int fail(const std::string& kind, const std::string& message, const std::string& command) {
  const nlohmann::json record = {
      {"error", {{"kind", kind}, {"message", message}, {"command", command}}}};
  std::cerr << record.dump() << '\n';
  return exit_code(kind);
}

struct RunFlags {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
};

vasb::ExperimentConfig load_run(const RunFlags& f) {
  vasb::ExperimentConfig c = vasb::load_experiment_config(f.config);
  if (!f.output.empty()) c.output_dir = f.output;
  if (f.seed) c.train.seed = *f.seed;
  c.validate();
  return c;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "Experiment configuration (JSON)")->required();
  cmd->add_option("--output", f.output, "Override output_dir");
  cmd->add_option("--seed", f.seed, "Override train.seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vasb: dropout information bottleneck experiments"};
  app.require_subcommand(1);
  RunFlags flags;
  bool resume = false;
  std::string checkpoint;
  std::size_t workers = 1;
  std::vector<std::string> reports;

  auto* gen = app.add_subcommand("gen", "Generate training and evaluation corpora");
  add_run_flags(gen, flags);
  auto* train = app.add_subcommand("train", "Train a model on the run's corpus");
  add_run_flags(train, flags);
  train->add_flag("--resume", resume, "Continue from the newest checkpoint");
  auto* eval = app.add_subcommand("eval", "Evaluate the trained model");
  add_run_flags(eval, flags);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate (default: model.ckpt)");
  auto* sweep = app.add_subcommand("sweep", "Run a hyperparameter sweep");
  sweep->add_option("--config", flags.config, "Sweep specification (JSON)")->required();
  sweep->add_option("--output", flags.output, "Sweep directory")->required();
  sweep->add_option("--workers", workers, "Parallel workers")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", flags.seed, "Override the base train.seed");
  auto* report = app.add_subcommand("report", "Compare evaluation reports");
  report->add_option("--output", flags.output, "Output table (default: stdout)");
  report->add_option("reports", reports, "report.tsv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), argc > 1 ? argv[1] : "");
  }

  const std::string command = app.get_subcommands().front()->get_name();
  vasb::RunOptions opt;
  opt.log = &std::cerr;
  opt.resume = resume;
  try {
    if (command == "gen") {
      vasb::cmd_gen(load_run(flags), opt);
    } else if (command == "train") {
      const auto out = vasb::cmd_train(load_run(flags), opt);
      std::cerr << "train: " << out.state.step << " steps in " << vasb::format_number(out.seconds)
                << " s\n";
    } else if (command == "eval") {
      std::optional<std::filesystem::path> ck;
      if (!checkpoint.empty()) ck = checkpoint;
      vasb::cmd_eval(load_run(flags), opt, ck);
    } else if (command == "sweep") {
      vasb::SweepSpec spec = vasb::load_sweep_spec(flags.config);
      if (flags.seed) spec.base.train.seed = *flags.seed;
      const auto results = vasb::cmd_sweep(spec, flags.output, workers, opt);
      std::size_t failed = 0;
      for (const auto& r : results) failed += r.ok ? 0 : 1;
      std::cerr << "sweep: " << results.size() - failed << " ok, " << failed << " failed\n";
    } else if (command == "report") {
      std::vector<std::filesystem::path> paths(reports.begin(), reports.end());
      const std::string table = vasb::cmd_report(paths);
      if (flags.output.empty())
        std::cout << table;
      else
        vasb::io::write_file(flags.output, [&](std::ostream& o) { o << table; }, false);
    }
  } catch (const vasb::Error& e) {
    return fail(e.kind(), e.what(), command);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), command);
  }
  return 0;
}
