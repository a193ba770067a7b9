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

// Minimal-intervention safety filter.
//
// The barrier is the ellipsoid function h(p) = 1 - |C^-1 (p - center)|^2.
// It depends on position only, so thrust first shows up in its second
// derivative; constraints are therefore imposed on the exponential surrogate
// h_e = dh/dt + gamma h. The Lyapunov function is the weighted position and
// velocity tracking error. Both conditions are robustified against the
// per-axis GP confidence box before being handed to a slack-penalized QP.

#ifndef LBCEM_CORE_SAFETY_H_
#define LBCEM_CORE_SAFETY_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/dynamics.h"
#include "core/qp.h"
#include "core/world.h"

namespace lbcem::safety {

// Image of the unit ball under p = C o + center.
struct Ellipsoid {
  Eigen::Matrix3d shape = Eigen::Matrix3d::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();

  static Ellipsoid Ball(const Eigen::Vector3d& center, double radius);
  // C^-T C^-1. Throws NumericalError for a singular shape.
  Eigen::Matrix3d Precision() const;
};

enum class EllipsoidMode {
  // Ball around the current position, radius = clearance - margin.
  kCentered,
  // Ball of radius tangent_radius touching the nearest inflated obstacle on
  // the side of the current position, shrunk away from the others.
  kTangent,
};

struct SafetySpec {
  double kappa = 10.0;  // kappa(h) = kappa * h
  double alpha = 0.1;
  double gamma = 1.0;   // h_e = dh/dt + gamma h
  Eigen::Vector3d q_p = Eigen::Vector3d::Constant(0.8);  // diag(Q_p)
  Eigen::Vector3d q_v = Eigen::Vector3d::Constant(0.2);  // diag(Q_v)
  double c_delta = 3.0;
  double lambda_eps = 1e6;
  double lambda_eta = 1e4;
  double margin = 0.05;
  double min_radius = 0.01;
  double tangent_radius = 2.0;  // upper bound on the tangent ball radius
  EllipsoidMode mode = EllipsoidMode::kTangent;
  int qp_max_iterations = 100;

  void Validate() const;
};

struct SafeRegion {
  Ellipsoid ellipsoid;
  // Set when p lies inside an obstacle sphere; the ellipsoid then falls back
  // to the minimum radius.
  bool inside_obstacle = false;
};

// Ball centered at p with radius min(sensing_range, clearance) - margin,
// floored at min_radius.
SafeRegion CenteredSafeBall(const Eigen::Vector3d& p,
                            std::span<const DetectedObstacle> obstacles,
                            double sensing_range, double margin,
                            double min_radius);

// Ball of radius at most max_radius tangent to the nearest inflated
// obstacle on the vehicle side, shrunk to clear the others. Falls back to
// the centered ball when no such ball contains the vehicle.
SafeRegion TangentSafeBall(const Eigen::Vector3d& p,
                           std::span<const DetectedObstacle> obstacles,
                           double sensing_range, double max_radius,
                           double margin, double min_radius);

SafeRegion SafeEllipsoid(const Eigen::Vector3d& p,
                         std::span<const DetectedObstacle> obstacles,
                         double sensing_range, const SafetySpec& spec);

double BarrierValue(const Eigen::Vector3d& p, const Ellipsoid& e);
Eigen::Vector3d BarrierGradient(const Eigen::Vector3d& p, const Ellipsoid& e);

// Gradient of a scalar function of (p, v, t).
struct PhaseGradient {
  Eigen::Vector3d dp = Eigen::Vector3d::Zero();
  Eigen::Vector3d dv = Eigen::Vector3d::Zero();
  double dt = 0.0;
};

double HigherOrderBarrier(const State& x, const Ellipsoid& e, double gamma);
PhaseGradient HigherOrderBarrierGradient(const State& x, const Ellipsoid& e,
                                         double gamma);

double Lyapunov(const State& x, const DesiredState& desired,
                const SafetySpec& spec);
PhaseGradient LyapunovGradient(const State& x, const DesiredState& desired,
                               const SafetySpec& spec);

// Per-axis disturbance acceleration estimate (GP mean and std).
struct DisturbanceEstimate {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d stddev = Eigen::Vector3d::Zero();
};

// Lie derivatives of a phase function along the nominal quadrotor model.
struct LieTerms {
  double drift = 0.0;        // L_f (includes the explicit time derivative)
  double thrust = 0.0;       // L_g, thrust column; rate columns are zero
  double mean = 0.0;         // L_mu
  double uncertainty = 0.0;  // sum_i |d phi / d v_i| sigma_i
};

LieTerms ComputeLieTerms(const State& x, const PhaseGradient& grad,
                         const DisturbanceEstimate& d,
                         const QuadParams& params);

enum class ConstraintKind { kBarrier, kLyapunov };

// row * u + offset <= 0
struct AffineConstraint {
  Eigen::RowVector4d row = Eigen::RowVector4d::Zero();
  double offset = 0.0;
  ConstraintKind kind = ConstraintKind::kBarrier;

  double Evaluate(const Eigen::Vector4d& u) const { return row * u + offset; }
};

AffineConstraint CbfConstraint(const State& x, const Ellipsoid& e,
                               const DisturbanceEstimate& d,
                               const SafetySpec& spec,
                               const QuadParams& params);

AffineConstraint ClfConstraint(const State& x, const DesiredState& desired,
                               const DisturbanceEstimate& d,
                               const SafetySpec& spec,
                               const QuadParams& params);

struct QpProblem {
  Eigen::Vector4d u_mpc = Eigen::Vector4d::Zero();
  // At most one constraint of each kind.
  std::vector<AffineConstraint> constraints;
  double lambda_eps = 1e6;
  double lambda_eta = 1e4;
  Eigen::Vector4d lower = Eigen::Vector4d::Constant(-1.0);
  Eigen::Vector4d upper = Eigen::Vector4d::Constant(1.0);
  // Per-channel normalization of |u - u_mpc|; typically the box widths.
  Eigen::Vector4d scale = Eigen::Vector4d::Ones();
  int max_iterations = 100;
};

struct QpSolution {
  Eigen::Vector4d u = Eigen::Vector4d::Zero();
  double eps = 0.0;
  double eta = 0.0;
  int iterations = 0;
  qp::KktResiduals residuals;
};

// minimize sum_i ((u_i - u_mpc_i) / scale_i)^2 + lambda_eps eps^2
//          + lambda_eta eta^2
// subject to barrier row <= eps, lyapunov row <= eta, lower <= u <= upper.
QpSolution SolveQp(const QpProblem& problem);

// Same problem in the generic dense form over (u, eps, eta).
qp::DenseQp BuildDenseQp(const QpProblem& problem);

struct FilterResult {
  ControlInput u;
  bool intervened = false;
  double eps = 0.0;
  double eta = 0.0;
  int qp_iterations = 0;
  AffineConstraint cbf;
  std::optional<AffineConstraint> clf;
};

// Passes u_mpc through when it satisfies every constraint, otherwise
// returns the QP solution. The Lyapunov constraint is skipped when
// `use_clf` is false.
FilterResult MiFilter(const State& x, const ControlInput& u_mpc,
                      const Ellipsoid& e, const DesiredState& desired,
                      const DisturbanceEstimate& d, const SafetySpec& spec,
                      const QuadParams& params, bool use_clf);

EllipsoidMode ParseEllipsoidMode(const std::string& name);
std::string ToString(EllipsoidMode mode);

}  // namespace lbcem::safety

#endif  // LBCEM_CORE_SAFETY_H_
