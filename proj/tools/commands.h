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

// Command-line front end: run, sweep and plot.

#ifndef LBCEM_TOOLS_COMMANDS_H_
#define LBCEM_TOOLS_COMMANDS_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace lbcem::cli {

enum ExitCode {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitSafety = 4,
  kExitIo = 5,
  kExitInternal = 6,
};

// Output directory used when --out is absent.
inline constexpr char kOutDirEnv[] = "LBCEM_OUT_DIR";
inline constexpr char kDefaultOutDir[] = "lbcem_out";

struct RunOptions {
  std::string config;
  std::string variant;
  std::string wind;
  std::string horizon;
  std::string seed;
  std::vector<std::string> sets;  // "key=value"
  std::string out_dir;
};

struct SweepSpec {
  std::string config;
  std::vector<std::string> variants;
  std::vector<std::string> winds;
  std::vector<std::string> horizons;
  std::vector<std::string> seeds;
  std::vector<std::string> sets;
  std::string out_dir;
  int workers = 1;
};

struct PlotOptions {
  std::vector<std::string> logs;
  std::string out_dir;
  double c_delta = 3.0;
};

int RunCommand(const RunOptions& options, std::ostream& out, std::ostream& err);
int SweepCommand(const SweepSpec& spec, std::ostream& out, std::ostream& err);
int PlotCommand(const PlotOptions& options, std::ostream& out,
                std::ostream& err);

// Parses argv and dispatches.
int Main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace lbcem::cli

#endif  // LBCEM_TOOLS_COMMANDS_H_
