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
#include <numbers>

#include <gtest/gtest.h>

#include "core/errors.h"
#include "testing/generators.h"

namespace lbcem {
namespace {

using testing::Gen;

Eigen::Matrix3d Skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return s;
}

// Yaw-pitch-roll composition built from elementary rotations.
Eigen::Matrix3d ZyxOracle(const Eigen::Vector3d& att) {
  return (Eigen::AngleAxisd(att.z(), Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(att.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(att.x(), Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

double StateDistance(const State& a, const State& b) {
  Eigen::Matrix<double, 9, 1> d;
  d << a.p - b.p, a.v - b.v, a.att - b.att;
  return d.norm();
}

TEST(RotationMatrixTest, IdentityAtZero) {
  EXPECT_TRUE(RotationMatrix(Eigen::Vector3d::Zero())
                  .isApprox(Eigen::Matrix3d::Identity(), 1e-15));
}

TEST(RotationMatrixTest, PureYaw) {
  const double psi = 0.7;
  const Eigen::Matrix3d r = RotationMatrix({0.0, 0.0, psi});
  Eigen::Matrix3d want;
  want << std::cos(psi), -std::sin(psi), 0, std::sin(psi), std::cos(psi), 0, 0,
      0, 1;
  EXPECT_LT((r - want).norm(), 1e-15);
}

TEST(RotationMatrixProperty, OrthonormalAndMatchesComposition) {
  Gen gen(11);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d att = gen.Vec3(-4.0, 4.0);
    const Eigen::Matrix3d r = RotationMatrix(att);
    EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).norm(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    EXPECT_LT((r - ZyxOracle(att)).norm(), 1e-12);
  }
}

// R(att(t)) must evolve as R S(w).
TEST(EulerRatesProperty, ConsistentWithBodyRateKinematics) {
  Gen gen(12);
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d att(gen.Uniform(-1.2, 1.2), gen.Uniform(-1.2, 1.2),
                              gen.Uniform(-3.0, 3.0));
    const Eigen::Vector3d w = gen.Vec3(-3.0, 3.0);
    const Eigen::Vector3d rates = EulerRates(att, w);
    const Eigen::Matrix3d dr =
        (RotationMatrix(att + h * rates) - RotationMatrix(att - h * rates)) /
        (2.0 * h);
    EXPECT_LT((dr - RotationMatrix(att) * Skew(w)).norm(), 1e-6);
  }
}

TEST(EulerRatesTest, GimbalLockThrows) {
  const Eigen::Vector3d att(0.0, std::numbers::pi / 2 - 1e-8, 0.0);
  EXPECT_THROW(EulerRates(att, Eigen::Vector3d::Ones()), GimbalLockError);
  State x;
  x.att = att;
  EXPECT_THROW(Derivative(x, {}, Eigen::Vector3d::Zero(), QuadParams{}),
               NumericalError);
}

TEST(DerivativeTest, HoverIsEquilibrium) {
  const QuadParams q;
  EXPECT_NEAR(q.hover_thrust(), 0.7848, 1e-12);
  State x;
  x.p = {1.0, 2.0, 3.0};
  const StateDerivative d =
      Derivative(x, {q.hover_thrust(), Eigen::Vector3d::Zero()},
                 Eigen::Vector3d::Zero(), q);
  EXPECT_LT(d.v_dot.norm(), 1e-15);
  EXPECT_LT(d.p_dot.norm(), 1e-15);
  EXPECT_LT(d.att_dot.norm(), 1e-15);
}

TEST(DerivativeTest, DragFromHeadWind) {
  const QuadParams q;
  const State x;
  const Eigen::Vector3d wind(5.0, 0.0, 0.0);
  EXPECT_LT((DragForce(x.v, wind, q) - Eigen::Vector3d(0.15, 0.0, 0.0)).norm(),
            1e-15);
  const StateDerivative d = Derivative(x, {0.0, Eigen::Vector3d::Zero()}, wind, q);
  EXPECT_NEAR(d.v_dot.x(), 1.875, 1e-12);
  EXPECT_NEAR(d.v_dot.z(), -9.81, 1e-12);
}

TEST(DerivativeTest, ZeroRatesFreezeAttitude) {
  Gen gen(13);
  const QuadParams q;
  State x = gen.FlightState();
  const StateDerivative d =
      Derivative(x, {0.5, Eigen::Vector3d::Zero()}, gen.Vec3(-5, 5), q);
  EXPECT_EQ(d.att_dot, Eigen::Vector3d::Zero());
  EXPECT_EQ(d.p_dot, x.v);
}

TEST(NominalDerivativeProperty, TrueDisturbanceReproducesPlant) {
  Gen gen(14);
  const QuadParams q;
  for (int i = 0; i < 200; ++i) {
    const State x = gen.FlightState();
    const ControlInput u = gen.Control(q);
    const Eigen::Vector3d wind = gen.Vec3(-12.0, 12.0);
    const Eigen::Vector3d d_hat = DragForce(x.v, wind, q) / q.mass;
    const StateDerivative a = Derivative(x, u, wind, q);
    const StateDerivative b = NominalDerivative(x, u, d_hat, q);
    EXPECT_LT((a.v_dot - b.v_dot).norm(), 1e-12);
    EXPECT_EQ(a.p_dot, b.p_dot);
    EXPECT_EQ(a.att_dot, b.att_dot);
  }
  const StateDerivative hover = NominalDerivative(
      State{}, {q.hover_thrust(), Eigen::Vector3d::Zero()},
      Eigen::Vector3d::Zero(), q);
  EXPECT_LT(hover.v_dot.norm(), 1e-15);
}

TEST(StepTest, HoverHeldOneSecond) {
  const QuadParams q;
  State x;
  x.p = {0.5, -0.5, 2.0};
  const State start = x;
  for (int k = 0; k < 50; ++k) {
    x = Step(x, {q.hover_thrust(), Eigen::Vector3d::Zero()},
             Eigen::Vector3d::Zero(), q, 0.02);
  }
  EXPECT_LT((x.p - start.p).norm(), 1e-9);
}

TEST(StepTest, FreeFallMatchesBallistic) {
  QuadParams q;
  q.drag.setZero();
  State x;
  x.v = {0.3, 0.0, 1.0};
  const double t = 1.0;
  for (int k = 0; k < 50; ++k) {
    x = Step(x, {0.0, Eigen::Vector3d::Zero()}, Eigen::Vector3d::Zero(), q, 0.02);
  }
  const double dz = 1.0 * t - 0.5 * q.gravity * t * t;
  EXPECT_NEAR(x.p.z(), dz, 1e-6 * std::abs(dz));
  EXPECT_NEAR(x.p.x(), 0.3, 1e-12);
}

TEST(StepTest, FourthOrderConvergence) {
  const QuadParams q;
  State x0;
  x0.v = {1.0, -0.5, 0.2};
  x0.att = {0.2, -0.3, 0.5};
  const ControlInput u{0.9, Eigen::Vector3d(0.4, -0.3, 0.6)};
  const Eigen::Vector3d wind(-8.0, 2.0, 0.0);
  auto integrate = [&](int n) {
    State x = x0;
    for (int k = 0; k < n; ++k) x = Step(x, u, wind, q, 1.0 / n);
    return x;
  };
  const State exact = integrate(4096);
  const double e1 = StateDistance(integrate(16), exact);
  const double e2 = StateDistance(integrate(32), exact);
  const double order = std::log2(e1 / e2);
  EXPECT_NEAR(order, 4.0, 0.5) << e1 << " " << e2;
}

TEST(StepTest, RejectsNonPositiveDt) {
  EXPECT_THROW(Step(State{}, {}, Eigen::Vector3d::Zero(), QuadParams{}, 0.0),
               ConfigError);
}

TEST(StepProperty, Deterministic) {
  Gen gen(15);
  const QuadParams q;
  for (int i = 0; i < 50; ++i) {
    State a = gen.FlightState();
    const Eigen::Vector3d wind = gen.Vec3(-10.0, 10.0);
    for (int k = 0; k < 20; ++k) {
      const ControlInput u = gen.Control(q);
      const State a2 = Step(a, u, wind, q, 0.02);
      const State a3 = Step(a, u, wind, q, 0.02);
      ASSERT_EQ(a2.p, a3.p);
      ASSERT_EQ(a2.v, a3.v);
      ASSERT_EQ(a2.att, a3.att);
      a = a2;
      if (std::abs(a.att.y()) > 1.3) break;
    }
  }
}

TEST(StepProperty, ZeroDragZeroWindPlantEqualsNominal) {
  Gen gen(16);
  QuadParams q;
  q.drag.setZero();
  for (int i = 0; i < 50; ++i) {
    State a = gen.FlightState();
    a.att.x() *= 0.3;
    a.att.y() *= 0.3;
    State b = a;
    for (int k = 0; k < 25; ++k) {
      ControlInput u = gen.Control(q);
      u.rates *= 0.2;
      a = Step(a, u, Eigen::Vector3d::Zero(), q, 0.02);
      b = NominalStep(b, u, Eigen::Vector3d::Zero(), q, 0.02);
      ASSERT_EQ(a.p, b.p);
      ASSERT_EQ(a.v, b.v);
      ASSERT_EQ(a.att, b.att);
    }
  }
}

TEST(DragProperty, DisturbanceBounded) {
  Gen gen(17);
  const QuadParams q;
  const double k = q.drag.maxCoeff();
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d v = gen.Vec3(-5.0, 5.0);
    const Eigen::Vector3d w = gen.Vec3(-15.0, 15.0);
    EXPECT_LE(DragForce(v, w, q).norm(), k * (w.norm() + v.norm()) + 1e-12);
  }
}

TEST(WindModelTest, NoTurbulenceIsConstant) {
  WindParams p;
  p.constant = {-8.0, 0.0, 0.0};
  WindModel wind(p);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(wind.Step(0.02), p.constant);
}

TEST(WindModelTest, SameSeedSameSequence) {
  WindParams p;
  p.constant = {-5.0, 0.0, 0.0};
  p.turbulence_intensity = Eigen::Vector3d::Constant(0.5);
  p.seed = 42;
  WindModel a(p), b(p);
  p.seed = 43;
  WindModel c(p);
  bool differs = false;
  for (int k = 0; k < 500; ++k) {
    const Eigen::Vector3d wa = a.Step(0.02);
    EXPECT_EQ(wa, b.Step(0.02));
    differs |= (wa != c.Step(0.02));
  }
  EXPECT_TRUE(differs);
}

TEST(WindModelTest, StationaryStandardDeviation) {
  WindParams p;
  p.turbulence_intensity = {0.5, 1.0, 2.0};
  p.correlation_time = 1.0;
  p.seed = 7;
  WindModel wind(p);
  // Start from the stationary law's support by burning in.
  for (int k = 0; k < 2000; ++k) wind.Step(0.02);
  const int n = 100000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d sum_sq = Eigen::Vector3d::Zero();
  // dt = tau keeps successive samples weakly correlated.
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector3d v = wind.Step(1.0);
    sum += v;
    sum_sq += v.cwiseAbs2();
  }
  const Eigen::Vector3d mean = sum / n;
  const Eigen::Vector3d sd = (sum_sq / n - mean.cwiseAbs2()).cwiseSqrt();
  for (int a = 0; a < 3; ++a) {
    EXPECT_NEAR(sd(a), p.turbulence_intensity(a),
                0.1 * p.turbulence_intensity(a));
  }
}

TEST(WindModelTest, ValidatesParameters) {
  WindParams p;
  p.correlation_time = 0.0;
  EXPECT_THROW(WindModel{p}, ConfigError);
  p.correlation_time = 1.0;
  p.turbulence_intensity = {0.0, -1.0, 0.0};
  EXPECT_THROW(WindModel{p}, ConfigError);
}

TEST(QuadParamsTest, Validation) {
  QuadParams q;
  EXPECT_NO_THROW(q.Validate());
  q.mass = 0.0;
  EXPECT_THROW(q.Validate(), ConfigError);
  q = QuadParams{};
  q.drag(1) = -0.1;
  EXPECT_THROW(q.Validate(), ConfigError);
}

}  // namespace
}  // namespace lbcem
