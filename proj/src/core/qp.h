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

#ifndef LBCEM_CORE_QP_H_
#define LBCEM_CORE_QP_H_

#include <Eigen/Dense>

namespace lbcem::qp {

// minimize 1/2 x^T H x + c^T x  subject to  G x <= h, with H positive
// definite. Sized for a handful of variables and constraints.
struct DenseQp {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Eigen::MatrixXd constraints;  // G, one row per inequality
  Eigen::VectorXd bounds;       // h
};

struct DenseQpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // one per row of G, >= 0
  int iterations = 0;
};

struct KktResiduals {
  double stationarity = 0.0;     // ||H x + c + G^T lambda||_inf
  double primal = 0.0;           // max(0, G x - h)
  double dual = 0.0;             // max(0, -lambda)
  double complementarity = 0.0;  // max |lambda_i (G_i x - h_i)|

  double Max() const;
};

// Primal active-set method from a feasible starting point. Throws
// NumericalError when `max_iterations` is exhausted or the start is
// infeasible.
DenseQpResult SolveActiveSet(const DenseQp& problem,
                             const Eigen::VectorXd& feasible_start,
                             int max_iterations = 100);

KktResiduals ComputeKktResiduals(const DenseQp& problem,
                                 const DenseQpResult& result);

}  // namespace lbcem::qp

#endif  // LBCEM_CORE_QP_H_
