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

#include "core/safety.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/errors.h"

namespace lbcem::safety {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Ellipsoid Ellipsoid::Ball(const Eigen::Vector3d& center, double radius) {
  if (!(radius > 0.0)) throw NumericalError("ball radius must be positive");
  return {radius * Eigen::Matrix3d::Identity(), center};
}

Eigen::Matrix3d Ellipsoid::Precision() const {
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(shape);
  if (!lu.isInvertible()) throw NumericalError("degenerate ellipsoid");
  const Eigen::Matrix3d inv = lu.inverse();
  return inv.transpose() * inv;
}

void SafetySpec::Validate() const {
  if (!(kappa > 0.0)) throw ConfigError("safety.kappa must be positive");
  if (!(alpha > 0.0)) throw ConfigError("safety.alpha must be positive");
  if (!(gamma > 0.0)) throw ConfigError("safety.gamma must be positive");
  if ((q_p.array() < 0.0).any() || (q_v.array() < 0.0).any())
    throw ConfigError("safety.q_p and safety.q_v must be non-negative");
  if (!(c_delta > 0.0)) throw ConfigError("safety.c_delta must be positive");
  if (!(lambda_eta > 0.0) || !(lambda_eps >= lambda_eta))
    throw ConfigError("safety requires lambda_eps >= lambda_eta > 0");
  if (!(margin >= 0.0)) throw ConfigError("safety.margin must be >= 0");
  if (!(min_radius > 0.0))
    throw ConfigError("safety.min_radius must be positive");
  if (!(tangent_radius >= min_radius))
    throw ConfigError("safety.tangent_radius must be >= min_radius");
  if (qp_max_iterations < 1)
    throw ConfigError("safety.qp_max_iterations must be >= 1");
}

SafeRegion CenteredSafeBall(const Eigen::Vector3d& p,
                            std::span<const DetectedObstacle> obstacles,
                            double sensing_range, double margin,
                            double min_radius) {
  double clearance = sensing_range;
  bool inside = false;
  for (const DetectedObstacle& d : obstacles) {
    const double r = d.obstacle.SurfaceDistance(p, 0.0);
    inside = inside || r < 0.0;
    clearance = std::min(clearance, r);
  }
  SafeRegion out;
  out.inside_obstacle = inside;
  const double radius = inside ? min_radius
                               : std::max(clearance - margin, min_radius);
  out.ellipsoid = Ellipsoid::Ball(p, radius);
  return out;
}

SafeRegion TangentSafeBall(const Eigen::Vector3d& p,
                           std::span<const DetectedObstacle> obstacles,
                           double sensing_range, double max_radius,
                           double margin, double min_radius) {
  if (obstacles.empty()) {
    return CenteredSafeBall(p, obstacles, sensing_range, margin, min_radius);
  }
  // Nearest obstacle by surface distance.
  const DetectedObstacle* nearest = nullptr;
  double nearest_r = kInf;
  for (const DetectedObstacle& d : obstacles) {
    const double r = d.obstacle.SurfaceDistance(p, 0.0);
    if (r < nearest_r) {
      nearest_r = r;
      nearest = &d;
    }
  }
  const Eigen::Vector3d c = nearest->obstacle.center;
  const double inflated = nearest->obstacle.radius + margin;
  Eigen::Vector3d offset = p - c;
  const double dist = offset.norm();
  const Eigen::Vector3d n =
      dist > 1e-12 ? Eigen::Vector3d(offset / dist) : Eigen::Vector3d::UnitZ();
  const double delta = dist - inflated;  // clearance to the inflated surface
  const Eigen::Vector3d touch = c + inflated * n;

  // Largest radius whose ball, grown from `touch` along n, stays clear of
  // every other inflated obstacle: |w + rho n| - rho >= R_j.
  double rho = max_radius;
  bool blocked = false;
  for (const DetectedObstacle& d : obstacles) {
    if (&d == nearest) continue;
    const double r_j = d.obstacle.radius + margin;
    const Eigen::Vector3d w = touch - d.obstacle.center;
    const double wn = w.dot(n);
    const double w2 = w.squaredNorm();
    if (w2 <= r_j * r_j) {
      blocked = true;
      break;
    }
    if (wn >= r_j) continue;  // never intersects
    rho = std::min(rho, (w2 - r_j * r_j) / (2.0 * (r_j - wn)));
  }

  SafeRegion out;
  out.inside_obstacle = nearest_r < 0.0;
  if (blocked || rho < min_radius || (delta >= 0.0 && 2.0 * rho < delta)) {
    return CenteredSafeBall(p, obstacles, sensing_range, margin, min_radius);
  }
  out.ellipsoid = Ellipsoid::Ball(touch + rho * n, rho);
  return out;
}

SafeRegion SafeEllipsoid(const Eigen::Vector3d& p,
                         std::span<const DetectedObstacle> obstacles,
                         double sensing_range, const SafetySpec& spec) {
  if (spec.mode == EllipsoidMode::kCentered) {
    return CenteredSafeBall(p, obstacles, sensing_range, spec.margin,
                            spec.min_radius);
  }
  return TangentSafeBall(p, obstacles, sensing_range, spec.tangent_radius,
                         spec.margin, spec.min_radius);
}

double BarrierValue(const Eigen::Vector3d& p, const Ellipsoid& e) {
  const Eigen::Vector3d o = e.shape.fullPivLu().solve(p - e.center);
  return 1.0 - o.squaredNorm();
}

Eigen::Vector3d BarrierGradient(const Eigen::Vector3d& p, const Ellipsoid& e) {
  return -2.0 * e.Precision() * (p - e.center);
}

double HigherOrderBarrier(const State& x, const Ellipsoid& e, double gamma) {
  return BarrierGradient(x.p, e).dot(x.v) + gamma * BarrierValue(x.p, e);
}

PhaseGradient HigherOrderBarrierGradient(const State& x, const Ellipsoid& e,
                                         double gamma) {
  const Eigen::Matrix3d precision = e.Precision();
  const Eigen::Vector3d grad_h = -2.0 * precision * (x.p - e.center);
  PhaseGradient g;
  g.dp = -2.0 * precision * x.v + gamma * grad_h;
  g.dv = grad_h;
  return g;
}

double Lyapunov(const State& x, const DesiredState& desired,
                const SafetySpec& spec) {
  const Eigen::Vector3d ep = x.p - desired.p;
  const Eigen::Vector3d ev = x.v - desired.v;
  return ep.dot(spec.q_p.cwiseProduct(ep)) + ev.dot(spec.q_v.cwiseProduct(ev));
}

PhaseGradient LyapunovGradient(const State& x, const DesiredState& desired,
                               const SafetySpec& spec) {
  PhaseGradient g;
  g.dp = 2.0 * spec.q_p.cwiseProduct(x.p - desired.p);
  g.dv = 2.0 * spec.q_v.cwiseProduct(x.v - desired.v);
  g.dt = -g.dp.dot(desired.v) - g.dv.dot(desired.a);
  return g;
}

LieTerms ComputeLieTerms(const State& x, const PhaseGradient& grad,
                         const DisturbanceEstimate& d,
                         const QuadParams& params) {
  const Eigen::Vector3d body_z = RotationMatrix(x.att).col(2);
  LieTerms t;
  t.drift = grad.dp.dot(x.v) - params.gravity * grad.dv.z() + grad.dt;
  t.thrust = grad.dv.dot(body_z) / params.mass;
  t.mean = grad.dv.dot(d.mean);
  t.uncertainty = grad.dv.cwiseAbs().dot(d.stddev.cwiseAbs());
  return t;
}

AffineConstraint CbfConstraint(const State& x, const Ellipsoid& e,
                               const DisturbanceEstimate& d,
                               const SafetySpec& spec,
                               const QuadParams& params) {
  const double h_e = HigherOrderBarrier(x, e, spec.gamma);
  const LieTerms lie = ComputeLieTerms(
      x, HigherOrderBarrierGradient(x, e, spec.gamma), d, params);
  // L_f + L_g u + L_mu - c |L_sigma| >= -kappa h_e
  AffineConstraint c;
  c.kind = ConstraintKind::kBarrier;
  c.row(0) = -lie.thrust;
  c.offset = -lie.drift - lie.mean + spec.c_delta * lie.uncertainty -
             spec.kappa * h_e;
  if (!c.row.allFinite() || !std::isfinite(c.offset)) {
    throw NumericalError("barrier constraint is not finite");
  }
  return c;
}

AffineConstraint ClfConstraint(const State& x, const DesiredState& desired,
                               const DisturbanceEstimate& d,
                               const SafetySpec& spec,
                               const QuadParams& params) {
  const double v = Lyapunov(x, desired, spec);
  const LieTerms lie =
      ComputeLieTerms(x, LyapunovGradient(x, desired, spec), d, params);
  // L_f + L_g u + L_mu + c |L_sigma| <= -alpha V
  AffineConstraint c;
  c.kind = ConstraintKind::kLyapunov;
  c.row(0) = lie.thrust;
  c.offset = lie.drift + lie.mean + spec.c_delta * lie.uncertainty +
             spec.alpha * v;
  if (!c.row.allFinite() || !std::isfinite(c.offset)) {
    throw NumericalError("lyapunov constraint is not finite");
  }
  return c;
}

qp::DenseQp BuildDenseQp(const QpProblem& problem) {
  // Variables: u (4), eps, eta.
  qp::DenseQp dense;
  dense.hessian = Eigen::MatrixXd::Zero(6, 6);
  dense.linear = Eigen::VectorXd::Zero(6);
  for (int i = 0; i < 4; ++i) {
    const double w = 1.0 / (problem.scale(i) * problem.scale(i));
    dense.hessian(i, i) = 2.0 * w;
    dense.linear(i) = -2.0 * w * problem.u_mpc(i);
  }
  dense.hessian(4, 4) = 2.0 * problem.lambda_eps;
  dense.hessian(5, 5) = 2.0 * problem.lambda_eta;

  const int m = static_cast<int>(problem.constraints.size()) + 8;
  dense.constraints = Eigen::MatrixXd::Zero(m, 6);
  dense.bounds = Eigen::VectorXd::Zero(m);
  int row = 0;
  bool seen_barrier = false, seen_lyapunov = false;
  for (const AffineConstraint& c : problem.constraints) {
    const bool barrier = c.kind == ConstraintKind::kBarrier;
    bool& seen = barrier ? seen_barrier : seen_lyapunov;
    if (seen) throw ConfigError("qp accepts one constraint of each kind");
    seen = true;
    dense.constraints.block<1, 4>(row, 0) = c.row;
    dense.constraints(row, barrier ? 4 : 5) = -1.0;
    dense.bounds(row) = -c.offset;
    ++row;
  }
  for (int i = 0; i < 4; ++i) {
    dense.constraints(row, i) = 1.0;
    dense.bounds(row++) = problem.upper(i);
    dense.constraints(row, i) = -1.0;
    dense.bounds(row++) = -problem.lower(i);
  }
  return dense;
}

QpSolution SolveQp(const QpProblem& problem) {
  if ((problem.lower.array() > problem.upper.array()).any()) {
    throw ConfigError("qp box bounds are inconsistent");
  }
  if ((problem.scale.array() <= 0.0).any()) {
    throw ConfigError("qp channel scales must be positive");
  }
  const qp::DenseQp dense = BuildDenseQp(problem);

  // Feasible start: clipped u_mpc with slacks absorbing any violation.
  Eigen::VectorXd start = Eigen::VectorXd::Zero(6);
  const Eigen::Vector4d u0 =
      problem.u_mpc.cwiseMax(problem.lower).cwiseMin(problem.upper);
  start.head<4>() = u0;
  for (const AffineConstraint& c : problem.constraints) {
    const double viol = std::max(0.0, c.Evaluate(u0));
    start(c.kind == ConstraintKind::kBarrier ? 4 : 5) = viol;
  }
  const qp::DenseQpResult raw =
      qp::SolveActiveSet(dense, start, problem.max_iterations);

  QpSolution out;
  out.u = raw.x.head<4>();
  out.eps = raw.x(4);
  out.eta = raw.x(5);
  out.iterations = raw.iterations;
  out.residuals = qp::ComputeKktResiduals(dense, raw);
  return out;
}

FilterResult MiFilter(const State& x, const ControlInput& u_mpc,
                      const Ellipsoid& e, const DesiredState& desired,
                      const DisturbanceEstimate& d, const SafetySpec& spec,
                      const QuadParams& params, bool use_clf) {
  FilterResult out;
  out.u = u_mpc;
  out.cbf = CbfConstraint(x, e, d, spec, params);
  if (use_clf) out.clf = ClfConstraint(x, desired, d, spec, params);

  const Eigen::Vector4d u = u_mpc.AsVector();
  const bool cbf_ok = out.cbf.Evaluate(u) <= 0.0;
  const bool clf_ok = !out.clf || out.clf->Evaluate(u) <= 0.0;
  if (cbf_ok && clf_ok) return out;

  QpProblem problem;
  problem.u_mpc = u;
  problem.constraints.push_back(out.cbf);
  if (out.clf) problem.constraints.push_back(*out.clf);
  problem.lambda_eps = spec.lambda_eps;
  problem.lambda_eta = spec.lambda_eta;
  problem.lower = params.lower();
  problem.upper = params.upper();
  problem.scale = problem.upper - problem.lower;
  problem.max_iterations = spec.qp_max_iterations;
  const QpSolution sol = SolveQp(problem);

  out.u = ControlInput::FromVector(sol.u);
  out.intervened = true;
  out.eps = sol.eps;
  out.eta = sol.eta;
  out.qp_iterations = sol.iterations;
  return out;
}

EllipsoidMode ParseEllipsoidMode(const std::string& name) {
  if (name == "centered") return EllipsoidMode::kCentered;
  if (name == "tangent") return EllipsoidMode::kTangent;
  throw ConfigError("safety.ellipsoid must be 'centered' or 'tangent', got '" +
                    name + "'");
}

std::string ToString(EllipsoidMode mode) {
  return mode == EllipsoidMode::kCentered ? "centered" : "tangent";
}

}  // namespace lbcem::safety
