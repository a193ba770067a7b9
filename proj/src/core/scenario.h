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

// Experiment configuration, the closed-loop simulation and run metrics.

#ifndef LBCEM_CORE_SCENARIO_H_
#define LBCEM_CORE_SCENARIO_H_

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/cem.h"
#include "core/dynamics.h"
#include "core/igp.h"
#include "core/safety.h"
#include "core/world.h"

namespace lbcem {

enum class Variant {
  kCempc,       // nominal model, no filter
  kLbCempc,     // + GP disturbance learning
  kLbCempcCbf,  // + barrier-only filter
  kLbCempcMi,   // + barrier and Lyapunov filter
};

Variant ParseVariant(const std::string& name);
std::string ToString(Variant v);
bool UsesGp(Variant v);
bool UsesBarrier(Variant v);
bool UsesLyapunov(Variant v);

// Named constant-wind levels: "none", "wind-1" .. "wind-4".
double WindLevelSpeed(const std::string& level);

struct GpConfig {
  igp::KernelParams kernel;
  int capacity = 20;
  int refresh_interval = igp::IncrementalGp::kDefaultRefreshInterval;
};

struct WindConfig {
  double speed = 0.0;                               // |v_c|, m/s
  Eigen::Vector3d direction{-1.0, 0.0, 0.0};        // normalized on use
  std::optional<double> turbulence_intensity;       // default 0.1 |v_c|
  double correlation_time = 1.0;
  std::string label = "none";

  WindParams Resolve(std::uint64_t seed) const;
};

struct ScenarioConfig {
  std::string name = "scenario";
  SpiralReference reference;
  std::vector<Obstacle> obstacles;
  WindConfig wind;
  Variant variant = Variant::kLbCempcMi;
  cem::CemConfig cem;
  cem::CostSpec cost = cem::CostSpec::Default();
  safety::SafetySpec safety;
  QuadParams quad;
  GpConfig gp;
  double duration = 20.0;    // s
  double frequency = 50.0;   // Hz
  double sensing_range = 2.0;
  int plant_substeps = 1;
  std::uint64_t seed = 0;
  bool abort_on_collision = false;
  double avoid_threshold = 0.1;    // m, deviation that counts as avoiding
  double coverage_warmup = 2.0;    // s excluded from GP coverage

  double dt() const { return 1.0 / frequency; }
  int steps() const;
  // Horizon length in seconds.
  double horizon_time() const { return cem.horizon * dt(); }
  void Validate() const;
};

// YAML-backed scenario description that accepts dotted-key overrides
// before being resolved into a ScenarioConfig.
class ScenarioSource {
 public:
  static ScenarioSource FromFile(const std::string& path);
  static ScenarioSource FromString(const std::string& text);
  ScenarioSource();
  ~ScenarioSource();
  ScenarioSource(const ScenarioSource& other);
  ScenarioSource& operator=(const ScenarioSource& other);

  // `key` is a dotted path (e.g. "cem.samples") or one of the shortcuts
  // "variant", "wind", "horizon" (seconds) and "seed". `value` is parsed as
  // a YAML scalar or flow sequence.
  void Set(const std::string& key, const std::string& value);

  // Throws ConfigError naming the offending key.
  ScenarioConfig Resolve() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Seeds derived from the user seed; the wind and the CEM sampler draw
// from separate streams.
std::uint64_t WindSeed(std::uint64_t seed);
std::uint64_t CemSeed(std::uint64_t seed);

struct StepRecord {
  double t = 0.0;
  State x;
  ControlInput u_mpc;
  ControlInput u_applied;
  DesiredState desired;
  double h = 1.0;
  double h_e = 0.0;
  double lyapunov = 0.0;
  bool filter_active = false;  // a filter was evaluated this step
  bool intervention = false;
  double eps = 0.0;
  double eta = 0.0;
  int qp_iterations = 0;
  bool gp_predicted = false;
  bool gp_updated = false;
  Eigen::Vector3d gp_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d gp_stddev = Eigen::Vector3d::Zero();
  Eigen::Vector3d wind = Eigen::Vector3d::Zero();
  Eigen::Vector3d disturbance = Eigen::Vector3d::Zero();  // K(v_w - v)/m
  std::uint64_t detected = 0;   // bit i: obstacle i within sensing range
  double clearance = 0.0;       // min surface distance over all obstacles
  int cem_iterations = 0;
  double cem_best_cost = 0.0;
  bool inside_obstacle = false;
};

struct StepTiming {
  double gp_predict_s = 0.0;
  double gp_update_s = 0.0;
  double mpc_s = 0.0;
  double filter_s = 0.0;
};

struct GpSample {
  double t = 0.0;
  Eigen::Vector3d input = Eigen::Vector3d::Zero();
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
};

struct RunMetrics {
  int steps = 0;
  double rms_error = 0.0;
  double max_error = 0.0;
  double min_barrier = 1.0;
  // One entry per configured obstacle; NaN when never avoided.
  std::vector<double> avoid_times;
  int penetrations = 0;          // steps with the vehicle inside a sphere
  double min_clearance = 0.0;
  int interventions = 0;
  int gp_updates = 0;
  // Fraction of steps after the warm-up with the true disturbance inside
  // mean +- c_delta sigma, per axis. NaN when the GP is not used.
  Eigen::Vector3d gp_coverage = Eigen::Vector3d::Constant(std::nan(""));
};

// Pure function of the step log.
RunMetrics ComputeMetrics(std::span<const StepRecord> steps,
                          int obstacle_count, double avoid_threshold,
                          double coverage_warmup, double c_delta);

enum class RunStatus { kOk, kNumerical, kSafety };

struct RunResult {
  ScenarioConfig config;
  std::vector<StepRecord> steps;
  std::vector<StepTiming> timing;
  std::vector<GpSample> dataset;
  RunMetrics metrics;
  RunStatus status = RunStatus::kOk;
  std::string error;
};

// Closed-loop simulation. Numerical failures and (when configured)
// collisions stop the loop early; the partial log is kept.
RunResult RunScenario(const ScenarioConfig& config);

// Output formats.
void WriteStepCsv(const RunResult& run, std::ostream& out);
void WriteTimingCsv(const RunResult& run, std::ostream& out);
void WriteGpDatasetCsv(const RunResult& run, std::ostream& out);
// One JSON object, no trailing newline.
std::string SummaryJson(const RunResult& run);

std::string ToString(RunStatus s);

}  // namespace lbcem

#endif  // LBCEM_CORE_SCENARIO_H_
