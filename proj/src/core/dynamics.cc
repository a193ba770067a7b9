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

#include "core/dynamics.h"

#include <cmath>

namespace lbcem {
namespace {

constexpr double kGimbalTolerance = 1e-6;

State Advance(const State& x, const StateDerivative& d, double h) {
  State out;
  out.p = x.p + h * d.p_dot;
  out.v = x.v + h * d.v_dot;
  out.att = x.att + h * d.att_dot;
  return out;
}

template <typename DerivativeFn>
State Rk4(const State& x, double dt, DerivativeFn&& f) {
  const StateDerivative k1 = f(x);
  const StateDerivative k2 = f(Advance(x, k1, 0.5 * dt));
  const StateDerivative k3 = f(Advance(x, k2, 0.5 * dt));
  const StateDerivative k4 = f(Advance(x, k3, dt));
  State out;
  const double w = dt / 6.0;
  out.p = x.p + w * (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot);
  out.v = x.v + w * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot);
  out.att = x.att +
            w * (k1.att_dot + 2.0 * k2.att_dot + 2.0 * k3.att_dot + k4.att_dot);
  return out;
}

// Shared by the plant and the nominal model; `accel_extra` is the
// non-gravity, non-thrust acceleration (drag / m or d_hat). Trig terms are
// evaluated once; this sits on the rollout hot path.
StateDerivative Kinematics(const State& x, const ControlInput& u,
                           const Eigen::Vector3d& accel_extra,
                           const QuadParams& params) {
  const double sr = std::sin(x.att.x()), cr = std::cos(x.att.x());
  const double sp = std::sin(x.att.y()), cp = std::cos(x.att.y());
  const double sy = std::sin(x.att.z()), cy = std::cos(x.att.z());
  if (std::abs(cp) < kGimbalTolerance) {
    throw GimbalLockError("pitch within 1e-6 of +-pi/2");
  }
  StateDerivative d;
  d.p_dot = x.v;
  const double a = u.thrust / params.mass;
  d.v_dot = Eigen::Vector3d(cr * sp * cy + sr * sy, cr * sp * sy - sr * cy,
                            cr * cp) * a + accel_extra;
  d.v_dot.z() -= params.gravity;
  const double tp = sp / cp;
  const Eigen::Vector3d& w = u.rates;
  d.att_dot = Eigen::Vector3d(w.x() + sr * tp * w.y() + cr * tp * w.z(),
                              cr * w.y() - sr * w.z(),
                              (sr * w.y() + cr * w.z()) / cp);
  return d;
}

}  // namespace

void QuadParams::Validate() const {
  if (!(mass > 0.0)) throw ConfigError("quad.mass must be positive");
  if (!(gravity > 0.0)) throw ConfigError("quad.gravity must be positive");
  if ((drag.array() < 0.0).any())
    throw ConfigError("quad.drag entries must be non-negative");
  if (!(thrust_max > 0.0))
    throw ConfigError("quad.thrust_max must be positive");
  if ((rate_min.array() >= rate_max.array()).any())
    throw ConfigError("quad.rate_min must be below quad.rate_max");
}

void WindParams::Validate() const {
  if (!(correlation_time > 0.0))
    throw ConfigError("wind.correlation_time must be positive");
  if ((turbulence_intensity.array() < 0.0).any())
    throw ConfigError("wind.turbulence_intensity must be non-negative");
  if (!constant.allFinite()) throw ConfigError("wind constant must be finite");
}

Eigen::Matrix3d RotationMatrix(const Eigen::Vector3d& att) {
  const double sr = std::sin(att.x()), cr = std::cos(att.x());
  const double sp = std::sin(att.y()), cp = std::cos(att.y());
  const double sy = std::sin(att.z()), cy = std::cos(att.z());
  Eigen::Matrix3d r;
  r << cp * cy, sr * sp * cy - cr * sy, cr * sp * cy + sr * sy,  //
      cp * sy, sr * sp * sy + cr * cy, cr * sp * sy - sr * cy,   //
      -sp, sr * cp, cr * cp;
  return r;
}

Eigen::Vector3d EulerRates(const Eigen::Vector3d& att,
                           const Eigen::Vector3d& w) {
  const double sr = std::sin(att.x()), cr = std::cos(att.x());
  const double cp = std::cos(att.y());
  if (std::abs(cp) < kGimbalTolerance) {
    throw GimbalLockError("pitch within 1e-6 of +-pi/2");
  }
  const double tp = std::sin(att.y()) / cp;
  return {w.x() + sr * tp * w.y() + cr * tp * w.z(),  //
          cr * w.y() - sr * w.z(),                    //
          (sr * w.y() + cr * w.z()) / cp};
}

Eigen::Vector3d DragForce(const Eigen::Vector3d& velocity,
                          const Eigen::Vector3d& wind,
                          const QuadParams& params) {
  return params.drag.cwiseProduct(wind - velocity);
}

StateDerivative Derivative(const State& x, const ControlInput& u,
                           const Eigen::Vector3d& wind,
                           const QuadParams& params) {
  return Kinematics(x, u, DragForce(x.v, wind, params) / params.mass, params);
}

StateDerivative NominalDerivative(const State& x, const ControlInput& u,
                                  const Eigen::Vector3d& d_hat,
                                  const QuadParams& params) {
  return Kinematics(x, u, d_hat, params);
}

State Step(const State& x, const ControlInput& u, const Eigen::Vector3d& wind,
           const QuadParams& params, double dt) {
  if (!(dt > 0.0)) throw ConfigError("step dt must be positive");
  return Rk4(x, dt,
             [&](const State& s) { return Derivative(s, u, wind, params); });
}

State NominalStep(const State& x, const ControlInput& u,
                  const Eigen::Vector3d& d_hat, const QuadParams& params,
                  double dt) {
  if (!(dt > 0.0)) throw ConfigError("step dt must be positive");
  return Rk4(x, dt, [&](const State& s) {
    return NominalDerivative(s, u, d_hat, params);
  });
}

WindModel::WindModel(const WindParams& params)
    : params_(params), rng_(params.seed) {
  params_.Validate();
}

Eigen::Vector3d WindModel::Step(double dt) {
  if (!(dt > 0.0)) throw ConfigError("wind step dt must be positive");
  const double decay = std::exp(-dt / params_.correlation_time);
  const double gain = std::sqrt(1.0 - decay * decay);
  for (int i = 0; i < 3; ++i) {
    // Draw unconditionally so the stream does not depend on intensities.
    const double xi = normal_(rng_);
    turbulence_(i) = turbulence_(i) * decay +
                     params_.turbulence_intensity(i) * gain * xi;
  }
  return params_.constant + turbulence_;
}

}  // namespace lbcem
