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

// Cross-entropy-method MPC over the nominal quadrotor model augmented with a
// learned disturbance mean.

#ifndef LBCEM_CORE_CEM_H_
#define LBCEM_CORE_CEM_H_

#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "core/dynamics.h"
#include "core/igp.h"
#include "core/world.h"

namespace lbcem::cem {

// Columns are time steps; rows are (thrust, w_x, w_y, w_z).
using ControlSequence = Eigen::Matrix<double, 4, Eigen::Dynamic>;

struct CemConfig {
  int iterations = 5;
  int samples = 100;
  int horizon = 30;
  int elite = 10;
  double min_variance = 1e-3;
  double smoothing = 0.25;  // beta: weight kept on the previous distribution
  double dt = 0.02;

  void Validate() const;
};

struct ControlBounds {
  Eigen::Vector4d lower;
  Eigen::Vector4d upper;

  static ControlBounds From(const QuadParams& params) {
    return {params.lower(), params.upper()};
  }
  // ((u_max - u_min) / 2)^2
  Eigen::Vector4d InitialVariance() const {
    return (0.5 * (upper - lower)).cwiseAbs2();
  }
};

struct SamplingDistribution {
  ControlSequence mean;
  ControlSequence variance;

  int horizon() const { return static_cast<int>(mean.cols()); }
  double MaxVariance() const { return variance.maxCoeff(); }

  // Zero means, Sigma_init variances.
  static SamplingDistribution Cold(int horizon, const ControlBounds& bounds);
};

// Drops the first step and appends (0, Sigma_init).
SamplingDistribution Shift(const SamplingDistribution& dist,
                           const ControlBounds& bounds);

using SequenceCost = std::function<double(const ControlSequence&)>;

struct CemResult {
  ControlSequence best_sequence;
  double best_cost = 0.0;
  SamplingDistribution distribution;
  int iterations = 0;
  // Lowest cost seen so far after each iteration.
  std::vector<double> best_so_far;
};

// Iterates sample / score / refit until the iteration cap or until every
// variance drops to min_variance. Samples are clipped to the bounds.
// Returns the lowest-cost sample of the final iteration (the warm mean when
// no iteration runs). Throws NumericalError when every sample is non-finite.
CemResult CemSolve(const SamplingDistribution& warm, const CemConfig& cfg,
                   const ControlBounds& bounds, const SequenceCost& cost,
                   std::mt19937_64& rng);

struct CostSpec {
  Eigen::Matrix<double, 6, 6> q = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix4d r_u = Eigen::Matrix4d::Zero();
  double obstacle_weight = 10.0;
  double activation_radius = 0.8;
  double terminal_multiplier = 1.0;
  // r_i is floored here so the w_i / r_i term stays finite.
  double min_distance = 0.01;

  static CostSpec Default();
  void Validate() const;
};

// (x - x_d)^T Q (x - x_d) over position and velocity.
double TrackingCost(const State& x, const DesiredState& desired,
                    const CostSpec& spec);

// Tracking term, w_i / r_i for every obstacle closer than the activation
// radius, and u^T R_u u. Obstacles are evaluated at `time_offset` seconds
// after their stored centers.
double RunningCost(const State& x, const Eigen::Vector4d& u,
                   const DesiredState& desired,
                   std::span<const DetectedObstacle> obstacles,
                   const CostSpec& spec, double time_offset = 0.0);

// Everything a rollout needs; immutable during a solve.
struct PredictionContext {
  State x0;
  std::vector<DesiredState> references;  // horizon + 1 entries
  std::vector<DetectedObstacle> obstacles;
  const igp::MeanSnapshot* disturbance = nullptr;  // null: d_hat = 0
  QuadParams quad;
  CostSpec cost;
  double dt = 0.02;
};

struct Rollout {
  std::vector<State> states;  // horizon + 1
  ControlSequence controls;
  double cost = 0.0;
};

// Rolls the nominal model forward and scores the sequence. A non-finite
// state or gimbal lock yields cost = +inf.
Rollout EvaluateSequence(const PredictionContext& ctx,
                         const ControlSequence& controls);
double SequenceCostOf(const PredictionContext& ctx,
                      const ControlSequence& controls);

struct MpcStepResult {
  ControlInput u_mpc;
  SamplingDistribution next;  // shifted warm start for the next step
  CemResult solve;
};

MpcStepResult MpcStep(const PredictionContext& ctx,
                      const SamplingDistribution& warm, const CemConfig& cfg,
                      const ControlBounds& bounds, std::mt19937_64& rng);

}  // namespace lbcem::cem

#endif  // LBCEM_CORE_CEM_H_
