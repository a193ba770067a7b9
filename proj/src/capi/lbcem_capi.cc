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

#include "lbcem/lbcem.h"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/errors.h"
#include "core/igp.h"
#include "core/qp.h"
#include "core/report.h"
#include "core/scenario.h"

struct lbcem_scenario {
  lbcem::ScenarioSource source;
};

struct lbcem_run {
  lbcem::RunResult result;
  std::string label;
  std::string summary;
};

struct lbcem_gp {
  explicit lbcem_gp(lbcem::igp::IncrementalGp g) : gp(std::move(g)) {}
  lbcem::igp::IncrementalGp gp;
};

namespace {

thread_local std::string last_error;

lbcem_status Fail(lbcem_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Maps the in-flight exception to a status. Order matters: the specific
// error types derive from the std ones.
lbcem_status Translate() {
  try {
    throw;
  } catch (const lbcem::ConfigError& e) {
    return Fail(LBCEM_ERR_CONFIG, e.what());
  } catch (const lbcem::NumericalError& e) {
    return Fail(LBCEM_ERR_NUMERICAL, e.what());
  } catch (const lbcem::SafetyViolation& e) {
    return Fail(LBCEM_ERR_SAFETY, e.what());
  } catch (const lbcem::IoError& e) {
    return Fail(LBCEM_ERR_IO, e.what());
  } catch (const lbcem::StateError& e) {
    return Fail(LBCEM_ERR_STATE, e.what());
  } catch (const std::bad_alloc&) {
    return Fail(LBCEM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(LBCEM_ERR_INTERNAL, e.what());
  } catch (...) {
    return Fail(LBCEM_ERR_INTERNAL, "unknown error");
  }
}

template <typename F>
lbcem_status Guard(F&& f) {
  last_error.clear();
  try {
    return f();
  } catch (...) {
    return Translate();
  }
}

#define LBCEM_REQUIRE(ptr)                                              \
  do {                                                                  \
    if ((ptr) == nullptr) {                                             \
      return Fail(LBCEM_ERR_ARGUMENT, std::string(#ptr) + " is null");  \
    }                                                                   \
  } while (0)

std::string FileLabel(const lbcem::RunResult& r) {
  char horizon[32];
  std::snprintf(horizon, sizeof(horizon), "%g", r.config.horizon_time());
  std::string label = r.config.name + "_" + lbcem::ToString(r.config.variant) +
                      "_" + r.config.wind.label + "_h" + horizon + "_s" +
                      std::to_string(r.config.seed);
  for (char& c : label) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return label;
}

lbcem_status StatusOf(lbcem::RunStatus s) {
  switch (s) {
    case lbcem::RunStatus::kOk:
      return LBCEM_OK;
    case lbcem::RunStatus::kNumerical:
      return LBCEM_ERR_NUMERICAL;
    case lbcem::RunStatus::kSafety:
      return LBCEM_ERR_SAFETY;
  }
  return LBCEM_ERR_INTERNAL;
}

template <typename Writer>
lbcem_status WriteFile(const char* path, std::ios::openmode mode, Writer&& w) {
  std::ofstream out(path, mode);
  if (!out) return Fail(LBCEM_ERR_IO, std::string("cannot write '") + path + "'");
  w(out);
  out.flush();
  if (!out) return Fail(LBCEM_ERR_IO, std::string("write failed for '") + path + "'");
  return LBCEM_OK;
}

}  // namespace

extern "C" {

const char* lbcem_version(void) { return "1.0.0"; }

const char* lbcem_last_error(void) { return last_error.c_str(); }

const char* lbcem_status_name(lbcem_status status) {
  switch (status) {
    case LBCEM_OK:
      return "ok";
    case LBCEM_ERR_ARGUMENT:
      return "argument";
    case LBCEM_ERR_CONFIG:
      return "config";
    case LBCEM_ERR_NUMERICAL:
      return "numerical";
    case LBCEM_ERR_SAFETY:
      return "safety";
    case LBCEM_ERR_IO:
      return "io";
    case LBCEM_ERR_STATE:
      return "state";
    case LBCEM_ERR_INTERNAL:
      return "internal";
  }
  return "unknown";
}

lbcem_status lbcem_scenario_load(const char* path, lbcem_scenario** out) {
  LBCEM_REQUIRE(out);
  *out = nullptr;
  LBCEM_REQUIRE(path);
  return Guard([&] {
    *out = new lbcem_scenario{lbcem::ScenarioSource::FromFile(path)};
    return LBCEM_OK;
  });
}

lbcem_status lbcem_scenario_parse(const char* yaml_text, lbcem_scenario** out) {
  LBCEM_REQUIRE(out);
  *out = nullptr;
  LBCEM_REQUIRE(yaml_text);
  return Guard([&] {
    *out = new lbcem_scenario{lbcem::ScenarioSource::FromString(yaml_text)};
    return LBCEM_OK;
  });
}

lbcem_status lbcem_scenario_clone(const lbcem_scenario* scenario,
                                  lbcem_scenario** out) {
  LBCEM_REQUIRE(out);
  *out = nullptr;
  LBCEM_REQUIRE(scenario);
  return Guard([&] {
    *out = new lbcem_scenario{scenario->source};
    return LBCEM_OK;
  });
}

lbcem_status lbcem_scenario_set(lbcem_scenario* scenario, const char* key,
                                const char* value) {
  LBCEM_REQUIRE(scenario);
  LBCEM_REQUIRE(key);
  LBCEM_REQUIRE(value);
  return Guard([&] {
    scenario->source.Set(key, value);
    return LBCEM_OK;
  });
}

lbcem_status lbcem_scenario_validate(const lbcem_scenario* scenario) {
  LBCEM_REQUIRE(scenario);
  return Guard([&] {
    scenario->source.Resolve().Validate();
    return LBCEM_OK;
  });
}

void lbcem_scenario_free(lbcem_scenario* scenario) { delete scenario; }

lbcem_status lbcem_run_execute(const lbcem_scenario* scenario, lbcem_run** out) {
  LBCEM_REQUIRE(out);
  *out = nullptr;
  LBCEM_REQUIRE(scenario);
  return Guard([&] {
    auto run = std::make_unique<lbcem_run>();
    run->result = lbcem::RunScenario(scenario->source.Resolve());
    run->label = FileLabel(run->result);
    run->summary = lbcem::SummaryJson(run->result);
    const lbcem_status status = StatusOf(run->result.status);
    if (status != LBCEM_OK) last_error = run->result.error;
    *out = run.release();
    return status;
  });
}

lbcem_status lbcem_run_status(const lbcem_run* run) {
  if (run == nullptr) return Fail(LBCEM_ERR_ARGUMENT, "run is null");
  return StatusOf(run->result.status);
}

const char* lbcem_run_error(const lbcem_run* run) {
  return run == nullptr ? "" : run->result.error.c_str();
}

const char* lbcem_run_label(const lbcem_run* run) {
  return run == nullptr ? "" : run->label.c_str();
}

const char* lbcem_run_summary_json(const lbcem_run* run) {
  return run == nullptr ? "" : run->summary.c_str();
}

lbcem_status lbcem_run_get_metrics(const lbcem_run* run, lbcem_metrics* out) {
  LBCEM_REQUIRE(run);
  LBCEM_REQUIRE(out);
  const lbcem::RunMetrics& m = run->result.metrics;
  out->steps = m.steps;
  out->rms_error = m.rms_error;
  out->max_error = m.max_error;
  out->min_barrier = m.min_barrier;
  out->penetrations = m.penetrations;
  out->min_clearance = m.min_clearance;
  out->interventions = m.interventions;
  out->gp_updates = m.gp_updates;
  for (int a = 0; a < 3; ++a) out->gp_coverage[a] = m.gp_coverage(a);
  out->obstacle_count = static_cast<int32_t>(m.avoid_times.size());
  return LBCEM_OK;
}

lbcem_status lbcem_run_avoid_time(const lbcem_run* run, int32_t index,
                                  double* out) {
  LBCEM_REQUIRE(run);
  LBCEM_REQUIRE(out);
  const auto& times = run->result.metrics.avoid_times;
  if (index < 0 || index >= static_cast<int32_t>(times.size())) {
    return Fail(LBCEM_ERR_ARGUMENT,
                "obstacle index " + std::to_string(index) + " out of range");
  }
  *out = times[index];
  return LBCEM_OK;
}

lbcem_status lbcem_run_write_steps(const lbcem_run* run, const char* path) {
  LBCEM_REQUIRE(run);
  LBCEM_REQUIRE(path);
  return Guard([&] {
    return WriteFile(path, std::ios::binary, [&](std::ostream& o) {
      lbcem::WriteStepCsv(run->result, o);
    });
  });
}

lbcem_status lbcem_run_write_timing(const lbcem_run* run, const char* path) {
  LBCEM_REQUIRE(run);
  LBCEM_REQUIRE(path);
  return Guard([&] {
    return WriteFile(path, std::ios::binary, [&](std::ostream& o) {
      lbcem::WriteTimingCsv(run->result, o);
    });
  });
}

lbcem_status lbcem_run_write_gp_dataset(const lbcem_run* run, const char* path) {
  LBCEM_REQUIRE(run);
  LBCEM_REQUIRE(path);
  return Guard([&] {
    return WriteFile(path, std::ios::binary, [&](std::ostream& o) {
      lbcem::WriteGpDatasetCsv(run->result, o);
    });
  });
}

lbcem_status lbcem_run_append_summary(const lbcem_run* run, const char* path) {
  LBCEM_REQUIRE(run);
  LBCEM_REQUIRE(path);
  return Guard([&] {
    return WriteFile(path, std::ios::binary | std::ios::app,
                     [&](std::ostream& o) { o << run->summary << '\n'; });
  });
}

void lbcem_run_free(lbcem_run* run) { delete run; }

lbcem_status lbcem_aggregate(const char* summaries_path, const char* table_path,
                             const char* cells_path, int32_t* cell_count) {
  LBCEM_REQUIRE(summaries_path);
  LBCEM_REQUIRE(table_path);
  return Guard([&] {
    std::ifstream in(summaries_path, std::ios::binary);
    if (!in) {
      return Fail(LBCEM_ERR_IO,
                  std::string("cannot open '") + summaries_path + "'");
    }
    const auto runs = lbcem::report::ParseSummaries(in);
    const auto cells = lbcem::report::Aggregate(runs);
    lbcem_status s = WriteFile(table_path, std::ios::binary, [&](std::ostream& o) {
      lbcem::report::WriteTable(cells, o);
    });
    if (s != LBCEM_OK) return s;
    if (cells_path != nullptr) {
      s = WriteFile(cells_path, std::ios::binary, [&](std::ostream& o) {
        lbcem::report::WriteCells(cells, o);
      });
      if (s != LBCEM_OK) return s;
    }
    if (cell_count != nullptr) *cell_count = static_cast<int32_t>(cells.size());
    return LBCEM_OK;
  });
}

lbcem_status lbcem_plot(const char* const* step_logs, size_t count,
                        const char* out_dir, double c_delta) {
  LBCEM_REQUIRE(step_logs);
  LBCEM_REQUIRE(out_dir);
  if (!(c_delta > 0.0)) return Fail(LBCEM_ERR_ARGUMENT, "c_delta must be > 0");
  return Guard([&] {
    std::vector<std::string> logs;
    for (size_t i = 0; i < count; ++i) {
      if (step_logs[i] == nullptr) {
        return Fail(LBCEM_ERR_ARGUMENT, "step log path is null");
      }
      logs.emplace_back(step_logs[i]);
    }
    lbcem::report::WritePlotData(logs, out_dir, c_delta);
    return LBCEM_OK;
  });
}

lbcem_status lbcem_gp_create(int32_t dim, const double* length_scales,
                             double prior_variance, double noise_variance,
                             int32_t capacity, lbcem_gp** out) {
  LBCEM_REQUIRE(out);
  *out = nullptr;
  LBCEM_REQUIRE(length_scales);
  if (dim <= 0) return Fail(LBCEM_ERR_ARGUMENT, "dim must be positive");
  return Guard([&] {
    lbcem::igp::KernelParams params;
    params.length_scales = Eigen::Map<const Eigen::VectorXd>(length_scales, dim);
    params.prior_variance = prior_variance;
    params.noise_variance = noise_variance;
    *out = new lbcem_gp(lbcem::igp::IncrementalGp(params, capacity));
    return LBCEM_OK;
  });
}

lbcem_status lbcem_gp_update(lbcem_gp* gp, const double* x, double y) {
  LBCEM_REQUIRE(gp);
  LBCEM_REQUIRE(x);
  return Guard([&] {
    gp->gp.Update(Eigen::Map<const Eigen::VectorXd>(x, gp->gp.params().dim()), y);
    return LBCEM_OK;
  });
}

lbcem_status lbcem_gp_predict(const lbcem_gp* gp, const double* x, double* mean,
                              double* variance) {
  LBCEM_REQUIRE(gp);
  LBCEM_REQUIRE(x);
  LBCEM_REQUIRE(mean);
  LBCEM_REQUIRE(variance);
  return Guard([&] {
    const lbcem::igp::Prediction p = gp->gp.Predict(
        Eigen::Map<const Eigen::VectorXd>(x, gp->gp.params().dim()));
    *mean = p.mean;
    *variance = p.variance;
    return LBCEM_OK;
  });
}

int32_t lbcem_gp_size(const lbcem_gp* gp) {
  return gp == nullptr ? 0 : gp->gp.size();
}

void lbcem_gp_free(lbcem_gp* gp) { delete gp; }

lbcem_status lbcem_qp_solve(int32_t n, int32_t m, const double* H,
                            const double* c, const double* G, const double* h,
                            const double* start, int32_t max_iterations,
                            double* x, double* multipliers,
                            int32_t* iterations) {
  if (n <= 0 || m < 0) return Fail(LBCEM_ERR_ARGUMENT, "bad problem size");
  LBCEM_REQUIRE(H);
  LBCEM_REQUIRE(c);
  LBCEM_REQUIRE(start);
  LBCEM_REQUIRE(x);
  if (m > 0) {
    LBCEM_REQUIRE(G);
    LBCEM_REQUIRE(h);
  }
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Guard([&] {
    lbcem::qp::DenseQp qp;
    qp.hessian = Eigen::Map<const RowMajor>(H, n, n);
    qp.linear = Eigen::Map<const Eigen::VectorXd>(c, n);
    if (m > 0) {
      qp.constraints = Eigen::Map<const RowMajor>(G, m, n);
      qp.bounds = Eigen::Map<const Eigen::VectorXd>(h, m);
    } else {
      qp.constraints.resize(0, n);
      qp.bounds.resize(0);
    }
    const lbcem::qp::DenseQpResult r = lbcem::qp::SolveActiveSet(
        qp, Eigen::Map<const Eigen::VectorXd>(start, n), max_iterations);
    Eigen::Map<Eigen::VectorXd>(x, n) = r.x;
    if (multipliers != nullptr && m > 0) {
      Eigen::Map<Eigen::VectorXd>(multipliers, m) = r.multipliers;
    }
    if (iterations != nullptr) *iterations = r.iterations;
    return LBCEM_OK;
  });
}

}  // extern "C"
