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

#include "core/qp.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "core/errors.h"

namespace lbcem::qp {
namespace {

constexpr double kFeasibilityTol = 1e-9;
constexpr double kStepTol = 1e-12;
constexpr double kDirectionTol = 1e-10;

}  // namespace

double KktResiduals::Max() const {
  return std::max({stationarity, primal, dual, complementarity});
}

DenseQpResult SolveActiveSet(const DenseQp& problem,
                             const Eigen::VectorXd& feasible_start,
                             int max_iterations) {
  const Eigen::Index n = problem.hessian.rows();
  const Eigen::Index m = problem.constraints.rows();
  const Eigen::MatrixXd& g_mat = problem.constraints;
  const Eigen::VectorXd& h = problem.bounds;
  if (problem.hessian.cols() != n || problem.linear.size() != n ||
      (m > 0 && g_mat.cols() != n) || h.size() != m ||
      feasible_start.size() != n) {
    throw NumericalError("qp dimension mismatch");
  }
  if (m > 0) {
    const double worst = (g_mat * feasible_start - h).maxCoeff();
    if (worst > kFeasibilityTol * (1.0 + h.cwiseAbs().maxCoeff())) {
      throw NumericalError("qp start is infeasible by " +
                           std::to_string(worst));
    }
  }

  DenseQpResult result;
  result.x = feasible_start;
  result.multipliers = Eigen::VectorXd::Zero(m);
  std::vector<Eigen::Index> working;
  std::vector<bool> in_working(m, false);
  // Set after an unblocked full step: x already minimizes over the working
  // set, so whatever p the next solve returns is roundoff.
  bool at_subproblem_minimum = false;

  for (int it = 0; it < max_iterations; ++it) {
    result.iterations = it + 1;
    const Eigen::Index w = static_cast<Eigen::Index>(working.size());
    // Null-space step: p = Z pz with A p = 0, multipliers from the range
    // part. Working on the KKT matrix directly loses the small pivots once
    // slack weights near 1e12 enter the Hessian.
    Eigen::MatrixXd a_t(n, w);
    for (Eigen::Index i = 0; i < w; ++i) a_t.col(i) = g_mat.row(working[i]);
    const Eigen::VectorXd grad = problem.hessian * result.x + problem.linear;
    Eigen::MatrixXd q_full = Eigen::MatrixXd::Identity(n, n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr;
    if (w > 0) {
      qr.compute(a_t);
      q_full = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    }
    const Eigen::MatrixXd z = q_full.rightCols(n - w);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    if (n - w > 0) {
      const Eigen::MatrixXd reduced = z.transpose() * problem.hessian * z;
      const Eigen::VectorXd reduced_rhs = -(z.transpose() * grad);
      Eigen::VectorXd pz;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        pz = ldlt.solve(reduced_rhs);
      }
      if (pz.size() == 0 || !pz.allFinite()) {
        pz = reduced.fullPivLu().solve(reduced_rhs);
      }
      p = z * pz;
    }
    Eigen::VectorXd sol(n + w);
    sol.head(n) = p;
    if (w > 0) {
      const Eigen::VectorXd range_rhs =
          q_full.leftCols(w).transpose() * (-(grad + problem.hessian * p));
      sol.tail(w) = qr.matrixQR()
                        .topLeftCorner(w, w)
                        .triangularView<Eigen::Upper>()
                        .solve(range_rhs);
    }
    if (!sol.allFinite()) throw NumericalError("qp KKT solve failed");

    if (at_subproblem_minimum ||
        p.lpNorm<Eigen::Infinity>() <=
            kStepTol * (1.0 + result.x.lpNorm<Eigen::Infinity>())) {
      at_subproblem_minimum = false;
      const Eigen::VectorXd lambda = sol.tail(w);
      Eigen::Index drop = -1;
      double most_negative = -1e-12;
      for (Eigen::Index i = 0; i < w; ++i) {
        if (lambda(i) < most_negative) {
          most_negative = lambda(i);
          drop = i;
        }
      }
      if (drop < 0) {
        result.multipliers.setZero();
        for (Eigen::Index i = 0; i < w; ++i) {
          result.multipliers(working[i]) = std::max(0.0, lambda(i));
        }
        return result;
      }
      in_working[working[drop]] = false;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    const double p_norm = p.norm();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_working[i]) continue;
      const double gp = g_mat.row(i).dot(p);
      // Rows (nearly) parallel to the working set's nullspace direction
      // cannot block; admitting them makes the KKT matrix singular.
      if (gp <= kDirectionTol * g_mat.row(i).norm() * p_norm) continue;
      const double slack = std::max(0.0, h(i) - g_mat.row(i).dot(result.x));
      const double step = slack / gp;
      if (step < alpha) {
        alpha = step;
        blocking = i;
      }
    }
    result.x += alpha * p;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[blocking] = true;
    } else {
      at_subproblem_minimum = true;
    }
  }
  throw NumericalError("qp active-set iteration cap reached");
}

KktResiduals ComputeKktResiduals(const DenseQp& problem,
                                 const DenseQpResult& result) {
  KktResiduals r;
  const Eigen::VectorXd grad = problem.hessian * result.x + problem.linear +
                               problem.constraints.transpose() *
                                   result.multipliers;
  r.stationarity = grad.lpNorm<Eigen::Infinity>();
  if (problem.constraints.rows() > 0) {
    const Eigen::VectorXd viol = problem.constraints * result.x - problem.bounds;
    r.primal = std::max(0.0, viol.maxCoeff());
    r.dual = std::max(0.0, -result.multipliers.minCoeff());
    r.complementarity =
        result.multipliers.cwiseProduct(viol).cwiseAbs().maxCoeff();
  }
  return r;
}

}  // namespace lbcem::qp
