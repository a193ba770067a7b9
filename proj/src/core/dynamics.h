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

#ifndef LBCEM_CORE_DYNAMICS_H_
#define LBCEM_CORE_DYNAMICS_H_

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "core/errors.h"

namespace lbcem {

// Quadrotor state in the world frame (z up). Attitude is ZYX Euler
// (roll, pitch, yaw).
struct State {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d att = Eigen::Vector3d::Zero();

  bool AllFinite() const {
    return p.allFinite() && v.allFinite() && att.allFinite();
  }
};

struct StateDerivative {
  Eigen::Vector3d p_dot = Eigen::Vector3d::Zero();
  Eigen::Vector3d v_dot = Eigen::Vector3d::Zero();
  Eigen::Vector3d att_dot = Eigen::Vector3d::Zero();
};

// Total thrust along body z plus body rotational rates.
struct ControlInput {
  double thrust = 0.0;
  Eigen::Vector3d rates = Eigen::Vector3d::Zero();

  Eigen::Vector4d AsVector() const {
    return {thrust, rates.x(), rates.y(), rates.z()};
  }
  static ControlInput FromVector(const Eigen::Ref<const Eigen::Vector4d>& u) {
    return {u(0), u.tail<3>()};
  }
};

struct QuadParams {
  double mass = 0.08;
  double gravity = 9.81;
  Eigen::Vector3d drag = Eigen::Vector3d::Constant(0.03);  // diag(K_drag)
  double thrust_max = 1.3;
  Eigen::Vector3d rate_min{-3.49, -3.49, -5.24};
  Eigen::Vector3d rate_max{3.49, 3.49, 5.24};

  // Box bounds over (thrust, w_x, w_y, w_z).
  Eigen::Vector4d lower() const {
    return {0.0, rate_min.x(), rate_min.y(), rate_min.z()};
  }
  Eigen::Vector4d upper() const {
    return {thrust_max, rate_max.x(), rate_max.y(), rate_max.z()};
  }
  double hover_thrust() const { return mass * gravity; }

  void Validate() const;
};

// Attitude rotation from body to world, ZYX convention.
Eigen::Matrix3d RotationMatrix(const Eigen::Vector3d& att);

// Maps body rates to Euler angle rates. Throws GimbalLockError when the
// pitch is within 1e-6 of +-pi/2.
Eigen::Vector3d EulerRates(const Eigen::Vector3d& att,
                           const Eigen::Vector3d& body_rates);

// Drag force K_drag (v_w - v), in newtons.
Eigen::Vector3d DragForce(const Eigen::Vector3d& velocity,
                          const Eigen::Vector3d& wind,
                          const QuadParams& params);

// Plant dynamics with the true wind drag.
StateDerivative Derivative(const State& x, const ControlInput& u,
                           const Eigen::Vector3d& wind,
                           const QuadParams& params);

// Nominal model plus a per-unit-mass disturbance acceleration estimate.
StateDerivative NominalDerivative(const State& x, const ControlInput& u,
                                  const Eigen::Vector3d& d_hat,
                                  const QuadParams& params);

// One classical RK4 step of the plant, wind held constant over the step.
State Step(const State& x, const ControlInput& u, const Eigen::Vector3d& wind,
           const QuadParams& params, double dt);

// Same integrator on the nominal model with d_hat held constant.
State NominalStep(const State& x, const ControlInput& u,
                  const Eigen::Vector3d& d_hat, const QuadParams& params,
                  double dt);

struct WindParams {
  Eigen::Vector3d constant = Eigen::Vector3d::Zero();      // v_c, m/s
  Eigen::Vector3d turbulence_intensity = Eigen::Vector3d::Zero();  // sigma_t
  double correlation_time = 1.0;                            // tau, s
  std::uint64_t seed = 0;

  void Validate() const;
};

// Constant wind plus per-axis first-order Gauss-Markov turbulence. The
// turbulent component starts at zero.
class WindModel {
 public:
  explicit WindModel(const WindParams& params);

  // Advances the turbulence by dt and returns v_c + v_t.
  Eigen::Vector3d Step(double dt);

  const Eigen::Vector3d& turbulence() const { return turbulence_; }
  const WindParams& params() const { return params_; }

 private:
  WindParams params_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Eigen::Vector3d turbulence_ = Eigen::Vector3d::Zero();
};

}  // namespace lbcem

#endif  // LBCEM_CORE_DYNAMICS_H_
