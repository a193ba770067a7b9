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

#include "core/cem.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "core/errors.h"

namespace lbcem::cem {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ControlSequence Clip(const ControlSequence& u, const ControlBounds& bounds) {
  return u.cwiseMax(bounds.lower.replicate(1, u.cols()))
      .cwiseMin(bounds.upper.replicate(1, u.cols()));
}

template <typename OnState>
double Simulate(const PredictionContext& ctx, const ControlSequence& controls,
                OnState&& on_state) {
  const int horizon = static_cast<int>(controls.cols());
  State x = ctx.x0;
  on_state(x);
  double total = 0.0;
  try {
    for (int k = 0; k < horizon; ++k) {
      const Eigen::Vector4d u = controls.col(k);
      total += RunningCost(x, u, ctx.references[k], ctx.obstacles, ctx.cost,
                           k * ctx.dt);
      const Eigen::Vector3d d_hat = ctx.disturbance != nullptr
                                        ? ctx.disturbance->Mean(x.v)
                                        : Eigen::Vector3d::Zero();
      x = NominalStep(x, ControlInput::FromVector(u), d_hat, ctx.quad, ctx.dt);
      if (!x.AllFinite()) return kInf;
      on_state(x);
    }
  } catch (const GimbalLockError&) {
    return kInf;
  }
  total += ctx.cost.terminal_multiplier *
           TrackingCost(x, ctx.references[horizon], ctx.cost);
  return std::isfinite(total) ? total : kInf;
}

}  // namespace

void CemConfig::Validate() const {
  if (iterations < 1) throw ConfigError("cem.iterations must be >= 1");
  if (samples < 1) throw ConfigError("cem.samples must be >= 1");
  if (horizon < 1) throw ConfigError("cem.horizon_steps must be >= 1");
  if (elite < 1 || elite > samples)
    throw ConfigError("cem.elite must be in [1, cem.samples]");
  if (!(smoothing >= 0.0 && smoothing < 1.0))
    throw ConfigError("cem.smoothing must be in [0, 1)");
  if (!(min_variance > 0.0))
    throw ConfigError("cem.min_variance must be positive");
  if (!(dt > 0.0)) throw ConfigError("cem dt must be positive");
}

SamplingDistribution SamplingDistribution::Cold(int horizon,
                                                const ControlBounds& bounds) {
  SamplingDistribution d;
  d.mean = ControlSequence::Zero(4, horizon);
  d.variance = bounds.InitialVariance().replicate(1, horizon);
  return d;
}

SamplingDistribution Shift(const SamplingDistribution& dist,
                           const ControlBounds& bounds) {
  const int h = dist.horizon();
  SamplingDistribution out = dist;
  if (h > 1) {
    out.mean.leftCols(h - 1) = dist.mean.rightCols(h - 1);
    out.variance.leftCols(h - 1) = dist.variance.rightCols(h - 1);
  }
  out.mean.col(h - 1).setZero();
  out.variance.col(h - 1) = bounds.InitialVariance();
  return out;
}

CemResult CemSolve(const SamplingDistribution& warm, const CemConfig& cfg,
                   const ControlBounds& bounds, const SequenceCost& cost,
                   std::mt19937_64& rng) {
  const int h = warm.horizon();
  if (warm.variance.cols() != h || h < 1) {
    throw ConfigError("sampling distribution shape mismatch");
  }
  const int m = cfg.samples;
  const int k_elite = cfg.elite;
  const double beta = cfg.smoothing;

  CemResult result;
  result.distribution = warm;
  SamplingDistribution& dist = result.distribution;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ControlSequence> samples(m, ControlSequence(4, h));
  std::vector<double> costs(m);
  std::vector<int> order(m);
  double best_so_far = kInf;

  while (result.iterations < cfg.iterations &&
         dist.MaxVariance() > cfg.min_variance) {
    const ControlSequence stddev = dist.variance.cwiseMax(0.0).cwiseSqrt();
    // All draws happen before any scoring.
    for (int j = 0; j < m; ++j) {
      ControlSequence& s = samples[j];
      for (int t = 0; t < h; ++t) {
        for (int r = 0; r < 4; ++r) {
          const double draw = dist.mean(r, t) + stddev(r, t) * normal(rng);
          s(r, t) = std::clamp(draw, bounds.lower(r), bounds.upper(r));
        }
      }
    }
    bool any_finite = false;
    for (int j = 0; j < m; ++j) {
      const double c = cost(samples[j]);
      costs[j] = std::isfinite(c) ? c : kInf;
      any_finite = any_finite || std::isfinite(c);
    }
    if (!any_finite) {
      throw NumericalError("every CEM sample produced a non-finite cost");
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return costs[a] < costs[b]; });

    ControlSequence elite_mean = ControlSequence::Zero(4, h);
    for (int e = 0; e < k_elite; ++e) elite_mean += samples[order[e]];
    elite_mean /= k_elite;
    ControlSequence elite_var = ControlSequence::Zero(4, h);
    for (int e = 0; e < k_elite; ++e) {
      elite_var += (samples[order[e]] - elite_mean).cwiseAbs2();
    }
    elite_var /= k_elite;

    dist.mean = (1.0 - beta) * elite_mean + beta * dist.mean;
    dist.variance = (1.0 - beta) * elite_var + beta * dist.variance;

    result.best_sequence = samples[order[0]];
    result.best_cost = costs[order[0]];
    best_so_far = std::min(best_so_far, result.best_cost);
    result.best_so_far.push_back(best_so_far);
    ++result.iterations;
  }

  if (result.iterations == 0) {
    result.best_sequence = Clip(warm.mean, bounds);
    result.best_cost = cost(result.best_sequence);
  }
  return result;
}

CostSpec CostSpec::Default() {
  CostSpec spec;
  spec.q.diagonal() << 8.5, 8.5, 8.5, 1.5, 1.5, 1.5;
  return spec;
}

void CostSpec::Validate() const {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(
      0.5 * (q + q.transpose()));
  if (eig.eigenvalues().minCoeff() < -1e-12)
    throw ConfigError("cost Q must be positive semidefinite");
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig_r(
      0.5 * (r_u + r_u.transpose()));
  if (eig_r.eigenvalues().minCoeff() < -1e-12)
    throw ConfigError("cost control weights must be positive semidefinite");
  if (!(obstacle_weight >= 0.0))
    throw ConfigError("cost.obstacle_weight must be non-negative");
  if (!(activation_radius > 0.0))
    throw ConfigError("cost.activation_radius must be positive");
  if (!(terminal_multiplier >= 0.0))
    throw ConfigError("cost.terminal_multiplier must be non-negative");
  if (!(min_distance > 0.0))
    throw ConfigError("cost.min_distance must be positive");
}

double TrackingCost(const State& x, const DesiredState& desired,
                    const CostSpec& spec) {
  Eigen::Matrix<double, 6, 1> e;
  e << x.p - desired.p, x.v - desired.v;
  return e.dot(spec.q * e);
}

double RunningCost(const State& x, const Eigen::Vector4d& u,
                   const DesiredState& desired,
                   std::span<const DetectedObstacle> obstacles,
                   const CostSpec& spec, double time_offset) {
  double cost = TrackingCost(x, desired, spec);
  if (spec.obstacle_weight > 0.0) {
    for (const DetectedObstacle& d : obstacles) {
      const double r = d.obstacle.SurfaceDistance(x.p, time_offset);
      if (r < spec.activation_radius) {
        cost += spec.obstacle_weight / std::max(r, spec.min_distance);
      }
    }
  }
  cost += u.dot(spec.r_u * u);
  return cost;
}

Rollout EvaluateSequence(const PredictionContext& ctx,
                         const ControlSequence& controls) {
  if (static_cast<int>(ctx.references.size()) < controls.cols() + 1) {
    throw ConfigError("prediction context has too few reference samples");
  }
  Rollout out;
  out.controls = controls;
  out.states.reserve(controls.cols() + 1);
  out.cost = Simulate(ctx, controls,
                      [&](const State& s) { out.states.push_back(s); });
  return out;
}

double SequenceCostOf(const PredictionContext& ctx,
                      const ControlSequence& controls) {
  return Simulate(ctx, controls, [](const State&) {});
}

MpcStepResult MpcStep(const PredictionContext& ctx,
                      const SamplingDistribution& warm, const CemConfig& cfg,
                      const ControlBounds& bounds, std::mt19937_64& rng) {
  if (static_cast<int>(ctx.references.size()) < warm.horizon() + 1) {
    throw ConfigError("prediction context has too few reference samples");
  }
  MpcStepResult out;
  out.solve = CemSolve(
      warm, cfg, bounds,
      [&ctx](const ControlSequence& u) { return SequenceCostOf(ctx, u); },
      rng);
  out.u_mpc = ControlInput::FromVector(out.solve.best_sequence.col(0));
  out.next = Shift(out.solve.distribution, bounds);
  return out;
}

}  // namespace lbcem::cem
