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

// Summary aggregation into RMS tables and plot-data extraction from step
// logs. Everything here is a pure function of its inputs.

#ifndef LBCEM_CORE_REPORT_H_
#define LBCEM_CORE_REPORT_H_

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace lbcem::report {

// The fields of one summary record that the tables need.
struct RunSummary {
  std::string scenario;
  std::string variant;
  std::string wind;
  double wind_speed = 0.0;
  double horizon = 0.0;  // s
  long long seed = 0;
  std::string status;    // "ok" or a failure kind
  double rms_error = 0.0;

  bool ok() const { return status == "ok"; }
};

RunSummary ParseSummary(const std::string& json_line);
// One record per non-blank line. Throws ConfigError with the line number.
std::vector<RunSummary> ParseSummaries(std::istream& in);

// One (variant, horizon, wind) cell. Mean and standard deviation are over
// the successful runs only.
struct TableCell {
  std::string variant;
  double horizon = 0.0;
  std::string wind;
  double wind_speed = 0.0;
  int runs = 0;
  int failures = 0;
  double mean_rms = 0.0;
  double stddev_rms = 0.0;

  bool all_failed() const { return runs > 0 && failures == runs; }
};

// Cells ordered by horizon, then variant (known variants in ablation
// order), then wind speed.
std::vector<TableCell> Aggregate(std::span<const RunSummary> runs);

// Wide table: one row per (horizon, variant), one column per wind level.
// A cell with some failed runs gets a trailing '*'; a cell whose runs all
// failed reads FAILED.
void WriteTable(std::span<const TableCell> cells, std::ostream& out);
// Long form, one line per cell.
void WriteCells(std::span<const TableCell> cells, std::ostream& out);

// A step log loaded column-wise.
class StepLog {
 public:
  static StepLog Read(std::istream& in);

  bool Has(const std::string& column) const;
  // Throws ConfigError("missing column 'x'") when absent.
  const std::vector<double>& Column(const std::string& column) const;
  int rows() const { return rows_; }

 private:
  std::map<std::string, std::vector<double>> columns_;
  int rows_ = 0;
};

// t, then true/mean/lower/upper for each axis, over the steps where the GP
// was queried. Bounds are mean -+ c_delta sigma.
void WriteGpSeries(const StepLog& log, double c_delta, std::ostream& out);
// t, error.
void WriteTrackingErrorSeries(const StepLog& log, std::ostream& out);
// t, h, h_e.
void WriteBarrierSeries(const StepLog& log, std::ostream& out);

// Writes <out_dir>/<label>_gp.csv, _tracking_error.csv and _barrier.csv for
// every log, plus tracking_error.csv holding all error series in long form
// (run,t,error). Returns the paths written. Throws IoError.
std::vector<std::string> WritePlotData(std::span<const std::string> step_logs,
                                       const std::string& out_dir,
                                       double c_delta);

}  // namespace lbcem::report

#endif  // LBCEM_CORE_REPORT_H_
