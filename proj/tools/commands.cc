// Copyright 2026 The lbcem Authors
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

#include "commands.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <thread>

#include <CLI11.hpp>

#include "lbcem/lbcem.h"

namespace lbcem::cli {
namespace {

namespace fs = std::filesystem;

struct ScenarioDeleter {
  void operator()(lbcem_scenario* s) const { lbcem_scenario_free(s); }
};
struct RunDeleter {
  void operator()(lbcem_run* r) const { lbcem_run_free(r); }
};
using ScenarioPtr = std::unique_ptr<lbcem_scenario, ScenarioDeleter>;
using RunPtr = std::unique_ptr<lbcem_run, RunDeleter>;

int ExitFor(lbcem_status s) {
  switch (s) {
    case LBCEM_OK:
      return kExitOk;
    case LBCEM_ERR_ARGUMENT:
    case LBCEM_ERR_CONFIG:
      return kExitConfig;
    case LBCEM_ERR_NUMERICAL:
      return kExitNumerical;
    case LBCEM_ERR_SAFETY:
      return kExitSafety;
    case LBCEM_ERR_IO:
      return kExitIo;
    case LBCEM_ERR_STATE:
    case LBCEM_ERR_INTERNAL:
      break;
  }
  return kExitInternal;
}

// Reports the last C API error and maps it to an exit code.
int Report(lbcem_status s, std::ostream& err, const std::string& context) {
  err << "error: " << context << ": " << lbcem_last_error() << '\n';
  return ExitFor(s);
}

std::string ResolveOutDir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env) {
    return env;
  }
  return kDefaultOutDir;
}

bool EnsureDir(const std::string& dir, std::ostream& err) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    err << "error: cannot create output directory '" << dir << "'\n";
    return false;
  }
  return true;
}

std::string Join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Applies "key=value" overrides, then the named shortcuts. Returns an exit
// code after reporting any failure.
int ApplyOverrides(
    lbcem_scenario* s, const std::vector<std::string>& sets,
    const std::vector<std::pair<const char*, std::string>>& shortcuts,
    std::ostream& err) {
  for (const std::string& kv : sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      err << "error: override '" << kv << "' must look like key=value\n";
      return kExitConfig;
    }
    const std::string key = kv.substr(0, eq);
    const lbcem_status st =
        lbcem_scenario_set(s, key.c_str(), kv.substr(eq + 1).c_str());
    if (st != LBCEM_OK) return Report(st, err, "override '" + key + "'");
  }
  for (const auto& [key, value] : shortcuts) {
    if (value.empty()) continue;
    const lbcem_status st = lbcem_scenario_set(s, key, value.c_str());
    if (st != LBCEM_OK) {
      return Report(st, err, std::string("--") + key);
    }
  }
  return kExitOk;
}

// Writes the step, timing and GP-dataset logs under `dir`.
lbcem_status WriteRunFiles(const lbcem_run* run, const std::string& dir) {
  const std::string label = lbcem_run_label(run);
  lbcem_status s =
      lbcem_run_write_steps(run, Join(dir, label + "_steps.csv").c_str());
  if (s != LBCEM_OK) return s;
  s = lbcem_run_write_timing(run, Join(dir, label + "_timing.csv").c_str());
  if (s != LBCEM_OK) return s;
  return lbcem_run_write_gp_dataset(run,
                                    Join(dir, label + "_gp_data.csv").c_str());
}

std::vector<std::string> Cleaned(const std::vector<std::string>& values) {
  std::vector<std::string> out;
  for (const std::string& v : values) {
    if (!v.empty()) out.push_back(v);
  }
  return out;
}

}  // namespace

int RunCommand(const RunOptions& options, std::ostream& out,
               std::ostream& err) {
  lbcem_scenario* raw = nullptr;
  lbcem_status s = lbcem_scenario_load(options.config.c_str(), &raw);
  if (s != LBCEM_OK) return Report(s, err, options.config);
  ScenarioPtr scenario(raw);

  const int applied = ApplyOverrides(scenario.get(), options.sets,
                                     {{"variant", options.variant},
                                      {"wind", options.wind},
                                      {"horizon", options.horizon},
                                      {"seed", options.seed}},
                                     err);
  if (applied != kExitOk) return applied;
  s = lbcem_scenario_validate(scenario.get());
  if (s != LBCEM_OK) return Report(s, err, options.config);

  const std::string dir = ResolveOutDir(options.out_dir);
  if (!EnsureDir(dir, err)) return kExitIo;

  lbcem_run* run_raw = nullptr;
  const lbcem_status run_status = lbcem_run_execute(scenario.get(), &run_raw);
  if (run_raw == nullptr) return Report(run_status, err, "run");
  RunPtr run(run_raw);

  s = WriteRunFiles(run.get(), dir);
  if (s == LBCEM_OK) {
    s = lbcem_run_append_summary(run.get(), Join(dir, "summaries.jsonl").c_str());
  }
  if (s != LBCEM_OK) return Report(s, err, "writing outputs");

  out << lbcem_run_summary_json(run.get()) << '\n';
  if (run_status != LBCEM_OK) {
    err << "error: run stopped early (" << lbcem_status_name(run_status)
        << "): " << lbcem_run_error(run.get()) << '\n';
  }
  return ExitFor(run_status);
}

int SweepCommand(const SweepSpec& spec, std::ostream& out, std::ostream& err) {
  const std::pair<const char*, const std::vector<std::string>*> lists[] = {
      {"variant", &spec.variants},
      {"wind", &spec.winds},
      {"horizon", &spec.horizons},
      {"seed", &spec.seeds}};
  for (const auto& [name, values] : lists) {
    if (values->empty()) {
      err << "error: " << name << " list is empty\n";
      return kExitConfig;
    }
    if (std::set<std::string>(values->begin(), values->end()).size() !=
        values->size()) {
      err << "error: " << name << " list has duplicates\n";
      return kExitConfig;
    }
  }
  if (spec.workers < 1) {
    err << "error: --workers must be at least 1\n";
    return kExitUsage;
  }

  lbcem_scenario* raw = nullptr;
  lbcem_status s = lbcem_scenario_load(spec.config.c_str(), &raw);
  if (s != LBCEM_OK) return Report(s, err, spec.config);
  ScenarioPtr base(raw);

  // Build and validate every grid point before running any of them.
  std::vector<ScenarioPtr> grid;
  for (const std::string& variant : spec.variants) {
    for (const std::string& wind : spec.winds) {
      for (const std::string& horizon : spec.horizons) {
        for (const std::string& seed : spec.seeds) {
          lbcem_scenario* copy = nullptr;
          s = lbcem_scenario_clone(base.get(), &copy);
          if (s != LBCEM_OK) return Report(s, err, "clone");
          grid.emplace_back(copy);
          const int applied = ApplyOverrides(copy, spec.sets,
                                             {{"variant", variant},
                                              {"wind", wind},
                                              {"horizon", horizon},
                                              {"seed", seed}},
                                             err);
          if (applied != kExitOk) return applied;
          s = lbcem_scenario_validate(copy);
          if (s != LBCEM_OK) return Report(s, err, spec.config);
        }
      }
    }
  }

  const std::string dir = ResolveOutDir(spec.out_dir);
  const std::string runs_dir = Join(dir, "runs");
  if (!EnsureDir(runs_dir, err)) return kExitIo;
  const std::string summaries = Join(dir, "summaries.jsonl");
  {
    std::ofstream probe(summaries, std::ios::binary | std::ios::trunc);
    if (!probe) {
      err << "error: cannot write '" << summaries << "'\n";
      return kExitIo;
    }
  }

  // Each worker owns its grid entries and result slot; summaries are
  // written in grid order afterwards so the file does not depend on
  // scheduling.
  std::vector<std::string> records(grid.size());
  std::vector<int> codes(grid.size(), kExitOk);
  std::vector<std::string> messages(grid.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < grid.size(); i = next++) {
      lbcem_run* r = nullptr;
      const lbcem_status st = lbcem_run_execute(grid[i].get(), &r);
      if (r == nullptr) {
        codes[i] = ExitFor(st);
        messages[i] = lbcem_last_error();
        continue;
      }
      RunPtr run(r);
      records[i] = lbcem_run_summary_json(run.get());
      codes[i] = ExitFor(st);
      if (st != LBCEM_OK) messages[i] = lbcem_run_error(run.get());
      const lbcem_status ws = WriteRunFiles(run.get(), runs_dir);
      if (ws != LBCEM_OK) {
        codes[i] = kExitIo;
        messages[i] = lbcem_last_error();
      }
    }
  };
  const int workers =
      std::min<int>(spec.workers, static_cast<int>(grid.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  int failed = 0;
  {
    std::ofstream jsonl(summaries, std::ios::binary | std::ios::trunc);
    for (size_t i = 0; i < grid.size(); ++i) {
      if (codes[i] != kExitOk) {
        ++failed;
        err << "warning: run " << i << " failed: " << messages[i] << '\n';
      }
      if (!records[i].empty()) jsonl << records[i] << '\n';
    }
    if (!jsonl) {
      err << "error: write failed for '" << summaries << "'\n";
      return kExitIo;
    }
  }
  for (size_t i = 0; i < grid.size(); ++i) {
    if (codes[i] == kExitIo) {
      err << "error: could not write logs for run " << i << '\n';
      return kExitIo;
    }
  }

  const std::string table = Join(dir, "table.csv");
  int32_t cells = 0;
  s = lbcem_aggregate(summaries.c_str(), table.c_str(),
                      Join(dir, "cells.csv").c_str(), &cells);
  if (s != LBCEM_OK) return Report(s, err, "aggregate");
  std::ifstream table_in(table, std::ios::binary);
  out << table_in.rdbuf();
  out << grid.size() << " runs, " << cells << " cells, " << failed
      << " failed\n";
  return kExitOk;
}

int PlotCommand(const PlotOptions& options, std::ostream& out,
                std::ostream& err) {
  if (options.logs.empty()) {
    err << "error: no step logs given\n";
    return kExitUsage;
  }
  for (const std::string& log : options.logs) {
    if (!fs::exists(log)) {
      err << "error: cannot open '" << log << "'\n";
      return kExitIo;
    }
  }
  std::vector<const char*> paths;
  for (const std::string& log : options.logs) paths.push_back(log.c_str());
  const std::string dir = ResolveOutDir(options.out_dir);
  const lbcem_status s =
      lbcem_plot(paths.data(), paths.size(), dir.c_str(), options.c_delta);
  if (s != LBCEM_OK) return Report(s, err, "plot");
  out << "plot data written to " << dir << '\n';
  return kExitOk;
}

int Main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learning-based CEM model predictive control simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", lbcem_version());

  RunOptions run;
  CLI::App* run_cmd = app.add_subcommand("run", "Simulate one scenario");
  run_cmd->add_option("--config", run.config, "Scenario YAML")->required();
  run_cmd->add_option("--variant", run.variant,
                      "CEMPC, LB-CEMPC, LB-CEMPC-CBF or LB-CEMPC-MI");
  run_cmd->add_option("--wind", run.wind, "none, wind-1..wind-4 or m/s");
  run_cmd->add_option("--horizon", run.horizon, "Prediction horizon in s");
  run_cmd->add_option("--seed", run.seed, "Random seed");
  run_cmd->add_option("--set", run.sets, "Config override key=value");
  run_cmd->add_option("--out", run.out_dir, "Output directory");

  SweepSpec sweep;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Run a variant x wind x horizon x seed grid");
  sweep_cmd->add_option("--config", sweep.config, "Scenario YAML")->required();
  CLI::Option* variants =
      sweep_cmd->add_option("--variant", sweep.variants, "Variants")
          ->delimiter(',');
  CLI::Option* winds =
      sweep_cmd->add_option("--wind", sweep.winds, "Wind levels")->delimiter(',');
  CLI::Option* horizons =
      sweep_cmd->add_option("--horizon", sweep.horizons, "Horizons in s")
          ->delimiter(',');
  CLI::Option* seeds =
      sweep_cmd->add_option("--seed", sweep.seeds, "Seeds")->delimiter(',');
  sweep_cmd->add_option("--set", sweep.sets, "Config override key=value");
  sweep_cmd->add_option("--out", sweep.out_dir, "Output directory");
  sweep_cmd->add_option("--workers", sweep.workers, "Parallel runs")
      ->default_val(1);

  PlotOptions plot;
  CLI::App* plot_cmd =
      app.add_subcommand("plot", "Extract figure data from step logs");
  plot_cmd->add_option("logs", plot.logs, "Step CSV files")->required();
  plot_cmd->add_option("--out", plot.out_dir, "Output directory");
  plot_cmd->add_option("--c-delta", plot.c_delta, "Confidence multiplier")
      ->default_val(3.0)
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*run_cmd) return RunCommand(run, out, err);
  if (*sweep_cmd) {
    // An absent list keeps the configured value; an explicit empty list is
    // rejected by SweepCommand.
    const std::pair<CLI::Option*, std::vector<std::string>*> lists[] = {
        {variants, &sweep.variants},
        {winds, &sweep.winds},
        {horizons, &sweep.horizons},
        {seeds, &sweep.seeds}};
    for (const auto& [opt, values] : lists) {
      if (opt->count() == 0) {
        *values = {""};
      } else {
        *values = Cleaned(*values);
      }
    }
    return SweepCommand(sweep, out, err);
  }
  return PlotCommand(plot, out, err);
}

}  // namespace lbcem::cli
