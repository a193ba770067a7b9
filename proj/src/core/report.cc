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

#include "core/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "core/errors.h"

namespace lbcem::report {
namespace {

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

int VariantRank(const std::string& v) {
  static const char* kOrder[] = {"CEMPC", "LB-CEMPC", "LB-CEMPC-CBF",
                                 "LB-CEMPC-MI"};
  for (int i = 0; i < 4; ++i) {
    if (v == kOrder[i]) return i;
  }
  return 4;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

}  // namespace

RunSummary ParseSummary(const std::string& json_line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad summary record: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("summary record must be an object");
  RunSummary s;
  try {
    s.scenario = j.value("scenario", std::string());
    s.variant = j.at("variant").get<std::string>();
    s.wind = j.at("wind").get<std::string>();
    s.wind_speed = j.value("wind_speed", 0.0);
    s.horizon = j.at("horizon").get<double>();
    s.seed = j.value("seed", 0LL);
    s.status = j.at("status").get<std::string>();
    const auto& rms = j.at("rms_error");
    s.rms_error = rms.is_null() ? std::nan("") : rms.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad summary record: ") + e.what());
  }
  return s;
}

std::vector<RunSummary> ParseSummaries(std::istream& in) {
  std::vector<RunSummary> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ParseSummary(line));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TableCell> Aggregate(std::span<const RunSummary> runs) {
  using Key = std::tuple<double, int, std::string, double, std::string>;
  std::map<Key, std::vector<const RunSummary*>> groups;
  for (const RunSummary& r : runs) {
    // Horizons are rounded when summaries are written; snap again so that
    // 0.6 and 0.6000000001 land in one row.
    const double h = std::round(r.horizon * 1e6) / 1e6;
    groups[{h, VariantRank(r.variant), r.variant, r.wind_speed, r.wind}]
        .push_back(&r);
  }
  std::vector<TableCell> cells;
  for (const auto& [key, members] : groups) {
    TableCell c;
    c.horizon = std::get<0>(key);
    c.variant = std::get<2>(key);
    c.wind_speed = std::get<3>(key);
    c.wind = std::get<4>(key);
    c.runs = static_cast<int>(members.size());
    double sum = 0.0;
    int ok = 0;
    for (const RunSummary* r : members) {
      if (r->ok()) {
        sum += r->rms_error;
        ++ok;
      }
    }
    c.failures = c.runs - ok;
    if (ok > 0) {
      c.mean_rms = sum / ok;
      double ss = 0.0;
      for (const RunSummary* r : members) {
        if (r->ok()) ss += (r->rms_error - c.mean_rms) * (r->rms_error - c.mean_rms);
      }
      c.stddev_rms = ok > 1 ? std::sqrt(ss / (ok - 1)) : 0.0;
    } else {
      c.mean_rms = std::nan("");
      c.stddev_rms = std::nan("");
    }
    cells.push_back(c);
  }
  return cells;
}

void WriteTable(std::span<const TableCell> cells, std::ostream& out) {
  // Column order: wind speed, then label.
  std::set<std::pair<double, std::string>> winds;
  for (const TableCell& c : cells) winds.insert({c.wind_speed, c.wind});
  out << "horizon,variant";
  for (const auto& w : winds) out << ',' << w.second;
  out << '\n';

  std::set<std::tuple<double, int, std::string>> rows;
  for (const TableCell& c : cells) {
    rows.insert({c.horizon, VariantRank(c.variant), c.variant});
  }
  for (const auto& [h, rank, variant] : rows) {
    out << Num(h) << ',' << variant;
    for (const auto& w : winds) {
      out << ',';
      auto it = std::find_if(cells.begin(), cells.end(), [&](const TableCell& c) {
        return c.horizon == h && c.variant == variant &&
               c.wind_speed == w.first && c.wind == w.second;
      });
      if (it == cells.end()) continue;
      if (it->all_failed()) {
        out << "FAILED";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", it->mean_rms);
        out << buf;
        if (it->failures > 0) out << '*';
      }
    }
    out << '\n';
  }
}

void WriteCells(std::span<const TableCell> cells, std::ostream& out) {
  out << "horizon,variant,wind,wind_speed,runs,failures,mean_rms,stddev_rms\n";
  for (const TableCell& c : cells) {
    out << Num(c.horizon) << ',' << c.variant << ',' << c.wind << ','
        << Num(c.wind_speed) << ',' << c.runs << ',' << c.failures << ','
        << (c.all_failed() ? std::string() : Num(c.mean_rms)) << ','
        << (c.all_failed() ? std::string() : Num(c.stddev_rms)) << '\n';
  }
}

StepLog StepLog::Read(std::istream& in) {
  StepLog log;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty step log");
  const std::vector<std::string> header = SplitCsv(line);
  std::vector<std::vector<double>*> slots;
  for (const std::string& name : header) {
    if (log.columns_.count(name)) {
      throw ConfigError("duplicate column '" + name + "'");
    }
    slots.push_back(&log.columns_[name]);
  }
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const std::vector<std::string> fields = SplitCsv(line);
    if (fields.size() != header.size()) {
      throw ConfigError("step log line " + std::to_string(number) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    for (size_t i = 0; i < fields.size(); ++i) {
      char* end = nullptr;
      const double v = std::strtod(fields[i].c_str(), &end);
      if (fields[i].empty() || *end != '\0') {
        throw ConfigError("step log line " + std::to_string(number) +
                          ": bad number in column '" + header[i] + "'");
      }
      slots[i]->push_back(v);
    }
    ++log.rows_;
  }
  return log;
}

bool StepLog::Has(const std::string& column) const {
  return columns_.count(column) > 0;
}

const std::vector<double>& StepLog::Column(const std::string& column) const {
  auto it = columns_.find(column);
  if (it == columns_.end()) {
    throw ConfigError("missing column '" + column + "'");
  }
  return it->second;
}

void WriteGpSeries(const StepLog& log, double c_delta, std::ostream& out) {
  static const char* kAxes[] = {"x", "y", "z"};
  const auto& t = log.Column("t");
  const auto& predicted = log.Column("gp_predict");
  const std::vector<double>* truth[3];
  const std::vector<double>* mean[3];
  const std::vector<double>* sigma[3];
  for (int a = 0; a < 3; ++a) {
    truth[a] = &log.Column(std::string("d_") + kAxes[a]);
    mean[a] = &log.Column(std::string("gp_mu_") + kAxes[a]);
    sigma[a] = &log.Column(std::string("gp_sigma_") + kAxes[a]);
  }
  out << 't';
  for (const char* a : kAxes) {
    out << ",true_" << a << ",mean_" << a << ",lower_" << a << ",upper_" << a;
  }
  out << '\n';
  for (int i = 0; i < log.rows(); ++i) {
    if (predicted[i] == 0.0) continue;
    out << Num(t[i]);
    for (int a = 0; a < 3; ++a) {
      const double mu = (*mean[a])[i];
      const double band = c_delta * (*sigma[a])[i];
      out << ',' << Num((*truth[a])[i]) << ',' << Num(mu) << ','
          << Num(mu - band) << ',' << Num(mu + band);
    }
    out << '\n';
  }
}

void WriteTrackingErrorSeries(const StepLog& log, std::ostream& out) {
  const auto& t = log.Column("t");
  const auto& e = log.Column("error");
  out << "t,error\n";
  for (int i = 0; i < log.rows(); ++i) {
    out << Num(t[i]) << ',' << Num(e[i]) << '\n';
  }
}

void WriteBarrierSeries(const StepLog& log, std::ostream& out) {
  const auto& t = log.Column("t");
  const auto& h = log.Column("h");
  const auto& he = log.Column("h_e");
  out << "t,h,h_e\n";
  for (int i = 0; i < log.rows(); ++i) {
    out << Num(t[i]) << ',' << Num(h[i]) << ',' << Num(he[i]) << '\n';
  }
}

std::vector<std::string> WritePlotData(std::span<const std::string> step_logs,
                                       const std::string& out_dir,
                                       double c_delta) {
  namespace fs = std::filesystem;
  if (step_logs.empty()) throw ConfigError("no step logs given");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());

  std::vector<std::string> written;
  std::ostringstream combined;
  combined << "run,t,error\n";
  std::set<std::string> labels;
  for (const std::string& path : step_logs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    StepLog log;
    try {
      log = StepLog::Read(in);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    std::string label = fs::path(path).stem().string();
    // Two logs with the same stem from different directories.
    for (int k = 2; labels.count(label); ++k) {
      label = fs::path(path).stem().string() + "_" + std::to_string(k);
    }
    labels.insert(label);

    // Validate every column before writing anything for this log.
    std::ostringstream gp, err, bar;
    try {
      WriteGpSeries(log, c_delta, gp);
      WriteTrackingErrorSeries(log, err);
      WriteBarrierSeries(log, bar);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    const std::pair<const char*, const std::ostringstream*> files[] = {
        {"_gp.csv", &gp}, {"_tracking_error.csv", &err}, {"_barrier.csv", &bar}};
    for (const auto& [suffix, data] : files) {
      const std::string out_path = (fs::path(out_dir) / (label + suffix)).string();
      std::ofstream out = OpenOut(out_path);
      out << data->str();
      if (!out) throw IoError("write failed for '" + out_path + "'");
      written.push_back(out_path);
    }
    const auto& t = log.Column("t");
    const auto& e = log.Column("error");
    for (int i = 0; i < log.rows(); ++i) {
      combined << label << ',' << Num(t[i]) << ',' << Num(e[i]) << '\n';
    }
  }
  const std::string all = (fs::path(out_dir) / "tracking_error.csv").string();
  std::ofstream out = OpenOut(all);
  out << combined.str();
  if (!out) throw IoError("write failed for '" + all + "'");
  written.push_back(all);
  return written;
}

}  // namespace lbcem::report
