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

// Incremental Gaussian-process regression over a fixed-size sliding window.
//
// The inverse of the regularized Gram matrix (K + sigma_noise^2 I) is kept
// up to date with O(n^2) block updates: a bordering step when a point is
// appended and a Schur-complement downdate when the oldest point is evicted.
// No O(n^3) factorization happens on the update path except for the
// periodic refresh that bounds roundoff drift.

#ifndef LBCEM_CORE_IGP_H_
#define LBCEM_CORE_IGP_H_

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "core/errors.h"

namespace lbcem::igp {

struct KernelParams {
  Eigen::VectorXd length_scales;  // diagonal of L
  double prior_variance = 1.0;    // sigma_f^2
  double noise_variance = 0.1;    // sigma_noise^2

  int dim() const { return static_cast<int>(length_scales.size()); }
  void Validate() const;
};

// Squared-exponential kernel sigma_f^2 exp(-1/2 (x-x')^T L^-2 (x-x')).
double Kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
              const Eigen::Ref<const Eigen::VectorXd>& x_prime,
              const KernelParams& params);

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double c_delta = 0.0;
};

// [mu - c sigma, mu + c sigma]. Throws NumericalError on negative variance.
ConfidenceInterval MakeConfidenceInterval(const Prediction& pred,
                                          double c_delta);

class IncrementalGp {
 public:
  static constexpr int kDefaultRefreshInterval = 1000;
  static constexpr double kPivotFloor = 1e-12;
  static constexpr double kJitter = 1e-9;

  IncrementalGp(KernelParams params, int capacity,
                int refresh_interval = kDefaultRefreshInterval);

  // Bordering update. Requires size() < capacity().
  void AddPoint(const Eigen::Ref<const Eigen::VectorXd>& x, double y);
  // Evicts the oldest point and appends (x, y). Requires a full window.
  void ReplacePoint(const Eigen::Ref<const Eigen::VectorXd>& x, double y);
  // AddPoint until full, ReplacePoint afterwards.
  void Update(const Eigen::Ref<const Eigen::VectorXd>& x, double y);

  Prediction Predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Same prediction through a fresh dense solve, ignoring the maintained
  // inverse. O(n^3); for checking and refresh only.
  Prediction PredictDense(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // K_sigma + sigma_noise^2 I (plus any jitter) rebuilt from the dataset.
  Eigen::MatrixXd RegularizedGram() const;

  // Rebuilds the inverse with a dense factorization.
  void Refresh();

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  bool full() const { return size_ == capacity_; }
  const KernelParams& params() const { return params_; }
  const Eigen::MatrixXd& inverse_gram() const { return inv_gram_; }
  // Columns are inputs, oldest first.
  Eigen::Ref<const Eigen::MatrixXd> inputs() const {
    return inputs_.leftCols(size_);
  }
  Eigen::Ref<const Eigen::VectorXd> outputs() const {
    return outputs_.head(size_);
  }
  // (K + sigma^2 I)^-1 y, refreshed after every update.
  const Eigen::VectorXd& weights() const { return weights_; }
  long updates_since_refresh() const { return updates_since_refresh_; }

 private:
  Eigen::VectorXd CrossCovariance(
      const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // Borders `base_inverse` (inverse of the first size_-1 points' Gram
  // matrix) with the kernel column of input x. Writes inv_gram_.
  void Border(const Eigen::MatrixXd& base_inverse,
              const Eigen::Ref<const Eigen::VectorXd>& x);
  void CheckInput(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  void AfterUpdate();

  KernelParams params_;
  Eigen::ArrayXd inv_length_sq_;
  int capacity_;
  int refresh_interval_;
  int size_ = 0;
  Eigen::MatrixXd inputs_;     // dim x capacity
  Eigen::VectorXd outputs_;    // capacity
  Eigen::VectorXd jitter_;     // extra diagonal per point, usually zero
  Eigen::MatrixXd inv_gram_;   // size x size
  Eigen::VectorXd weights_;    // size
  long updates_since_refresh_ = 0;
};

// Immutable posterior-mean evaluator over several GPs that share inputs and
// kernel parameters. Computes the kernel vector once per query.
class MeanSnapshot {
 public:
  MeanSnapshot() = default;
  explicit MeanSnapshot(const std::array<const IncrementalGp*, 3>& models);

  bool empty() const { return count_ == 0; }
  Eigen::Vector3d Mean(const Eigen::Vector3d& x) const;

 private:
  int count_ = 0;
  double prior_variance_ = 1.0;
  Eigen::Vector3d inv_length_sq_ = Eigen::Vector3d::Ones();
  Eigen::Matrix<double, 3, Eigen::Dynamic> inputs_;
  Eigen::Matrix<double, Eigen::Dynamic, 3> weights_;
};

// Three independent scalar GPs, one per disturbance axis, all fed the same
// inputs.
class DisturbanceModel {
 public:
  DisturbanceModel(const KernelParams& params, int capacity,
                   int refresh_interval = IncrementalGp::kDefaultRefreshInterval);

  void Update(const Eigen::Vector3d& x, const Eigen::Vector3d& y);
  std::array<Prediction, 3> Predict(const Eigen::Vector3d& x) const;
  MeanSnapshot Snapshot() const;

  const IncrementalGp& axis(int i) const { return axes_.at(i); }
  int size() const { return axes_[0].size(); }

 private:
  std::vector<IncrementalGp> axes_;
};

}  // namespace lbcem::igp

#endif  // LBCEM_CORE_IGP_H_
