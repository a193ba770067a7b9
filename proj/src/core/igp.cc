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

#include "core/igp.h"

#include <cmath>
#include <string>
#include <utility>

namespace lbcem::igp {
namespace {

// Roundoff allowance when clamping a slightly negative posterior variance.
constexpr double kVarianceRoundoff = 1e-9;

double ClampVariance(double var, double prior_variance) {
  if (var < 0.0 && var > -kVarianceRoundoff * prior_variance) return 0.0;
  return var;
}

}  // namespace

void KernelParams::Validate() const {
  if (length_scales.size() == 0)
    throw ConfigError("gp length_scales must be non-empty");
  if ((length_scales.array() <= 0.0).any())
    throw ConfigError("gp length_scales must be positive");
  if (!(prior_variance > 0.0))
    throw ConfigError("gp prior variance must be positive");
  if (!(noise_variance > 0.0))
    throw ConfigError("gp noise variance must be positive");
}

double Kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
              const Eigen::Ref<const Eigen::VectorXd>& x_prime,
              const KernelParams& params) {
  if (x.size() != params.length_scales.size() ||
      x_prime.size() != params.length_scales.size()) {
    throw ConfigError("kernel input dimension mismatch");
  }
  const Eigen::ArrayXd scaled =
      (x - x_prime).array() / params.length_scales.array();
  return params.prior_variance * std::exp(-0.5 * scaled.square().sum());
}

ConfidenceInterval MakeConfidenceInterval(const Prediction& pred,
                                          double c_delta) {
  if (!(c_delta > 0.0)) throw ConfigError("c_delta must be positive");
  if (pred.variance < 0.0 || !std::isfinite(pred.variance)) {
    throw NumericalError("negative posterior variance " +
                         std::to_string(pred.variance));
  }
  const double half = c_delta * std::sqrt(pred.variance);
  return {pred.mean - half, pred.mean + half, c_delta};
}

IncrementalGp::IncrementalGp(KernelParams params, int capacity,
                             int refresh_interval)
    : params_(std::move(params)),
      capacity_(capacity),
      refresh_interval_(refresh_interval) {
  params_.Validate();
  if (capacity_ < 1) throw ConfigError("gp capacity must be at least 1");
  if (refresh_interval_ < 1)
    throw ConfigError("gp refresh interval must be at least 1");
  inv_length_sq_ = params_.length_scales.array().square().inverse();
  inputs_.setZero(params_.dim(), capacity_);
  outputs_.setZero(capacity_);
  jitter_.setZero(capacity_);
  inv_gram_.resize(0, 0);
  weights_.resize(0);
}

void IncrementalGp::CheckInput(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != params_.dim())
    throw ConfigError("gp input dimension mismatch");
  if (!x.allFinite()) throw NumericalError("gp input is not finite");
}

Eigen::VectorXd IncrementalGp::CrossCovariance(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd k(size_);
  const Eigen::Index dim = inputs_.rows();
  for (int i = 0; i < size_; ++i) {
    double r2 = 0.0;
    for (Eigen::Index a = 0; a < dim; ++a) {
      const double d = inputs_(a, i) - x(a);
      r2 += d * d * inv_length_sq_(a);
    }
    k(i) = params_.prior_variance * std::exp(-0.5 * r2);
  }
  return k;
}

void IncrementalGp::Border(const Eigen::MatrixXd& base_inverse,
                           const Eigen::Ref<const Eigen::VectorXd>& x) {
  const int last = size_ - 1;
  // Kernel column against the first `last` points.
  Eigen::VectorXd k(last);
  for (int i = 0; i < last; ++i) {
    const Eigen::ArrayXd d = inputs_.col(i).array() - x.array();
    k(i) = params_.prior_variance *
           std::exp(-0.5 * (d.square() * inv_length_sq_).sum());
  }
  const Eigen::VectorXd gamma = base_inverse * k;
  const double self =
      params_.prior_variance + params_.noise_variance + jitter_(last);
  double pivot = self - k.dot(gamma);
  if (pivot < kPivotFloor) {
    jitter_(last) += kJitter;
    pivot += kJitter;
    if (pivot < kPivotFloor) {
      throw NumericalError("gp Schur pivot below floor after jitter");
    }
  }
  const double xi = 1.0 / pivot;
  Eigen::MatrixXd next(size_, size_);
  next.topLeftCorner(last, last) = base_inverse;
  next.topLeftCorner(last, last).noalias() += xi * gamma * gamma.transpose();
  next.col(last).head(last) = -xi * gamma;
  next.row(last).head(last) = -xi * gamma.transpose();
  next(last, last) = xi;
  inv_gram_ = std::move(next);
}

void IncrementalGp::AddPoint(const Eigen::Ref<const Eigen::VectorXd>& x,
                             double y) {
  CheckInput(x);
  if (size_ >= capacity_) {
    throw StateError("gp dataset is full; use ReplacePoint");
  }
  inputs_.col(size_) = x;
  outputs_(size_) = y;
  jitter_(size_) = 0.0;
  ++size_;
  const Eigen::MatrixXd base = inv_gram_;
  Border(base, x);
  AfterUpdate();
}

void IncrementalGp::ReplacePoint(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 double y) {
  CheckInput(x);
  if (size_ != capacity_) {
    throw StateError("gp dataset is not full; use AddPoint");
  }
  const int n = size_;
  // Inverse of the Gram matrix without the oldest point, from the block
  // partition [[rho, q^T], [q, Xi]] of the current inverse.
  const double rho = inv_gram_(0, 0);
  const Eigen::VectorXd q = inv_gram_.col(0).tail(n - 1);
  Eigen::MatrixXd lambda = inv_gram_.bottomRightCorner(n - 1, n - 1);
  lambda.noalias() -= (q / rho) * q.transpose();

  if (n > 1) {
    inputs_.leftCols(n - 1) = inputs_.middleCols(1, n - 1).eval();
    outputs_.head(n - 1) = outputs_.segment(1, n - 1).eval();
    jitter_.head(n - 1) = jitter_.segment(1, n - 1).eval();
  }
  inputs_.col(n - 1) = x;
  outputs_(n - 1) = y;
  jitter_(n - 1) = 0.0;
  Border(lambda, x);
  AfterUpdate();
}

void IncrementalGp::Update(const Eigen::Ref<const Eigen::VectorXd>& x,
                           double y) {
  if (full()) {
    ReplacePoint(x, y);
  } else {
    AddPoint(x, y);
  }
}

void IncrementalGp::AfterUpdate() {
  if (++updates_since_refresh_ >= refresh_interval_) {
    Refresh();
  }
  weights_ = inv_gram_ * outputs_.head(size_);
}

Eigen::MatrixXd IncrementalGp::RegularizedGram() const {
  Eigen::MatrixXd g(size_, size_);
  const Eigen::Index dim = inputs_.rows();
  for (int i = 0; i < size_; ++i) {
    for (int j = i; j < size_; ++j) {
      double r2 = 0.0;
      for (Eigen::Index a = 0; a < dim; ++a) {
        const double d = inputs_(a, i) - inputs_(a, j);
        r2 += d * d * inv_length_sq_(a);
      }
      const double kij = params_.prior_variance * std::exp(-0.5 * r2);
      g(i, j) = kij;
      g(j, i) = kij;
    }
    g(i, i) += params_.noise_variance + jitter_(i);
  }
  return g;
}

void IncrementalGp::Refresh() {
  updates_since_refresh_ = 0;
  if (size_ == 0) {
    inv_gram_.resize(0, 0);
    return;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(RegularizedGram());
  if (llt.info() != Eigen::Success) {
    throw NumericalError("gp Gram matrix is not positive definite");
  }
  inv_gram_ = llt.solve(Eigen::MatrixXd::Identity(size_, size_));
  inv_gram_ = 0.5 * (inv_gram_ + inv_gram_.transpose()).eval();
}

Prediction IncrementalGp::Predict(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  CheckInput(x);
  if (size_ == 0) return {0.0, params_.prior_variance};
  const Eigen::VectorXd k = CrossCovariance(x);
  const double mean = k.dot(weights_);
  const double var = params_.prior_variance - k.dot(inv_gram_ * k);
  return {mean, ClampVariance(var, params_.prior_variance)};
}

Prediction IncrementalGp::PredictDense(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  CheckInput(x);
  if (size_ == 0) return {0.0, params_.prior_variance};
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(RegularizedGram());
  const Eigen::VectorXd k = CrossCovariance(x);
  const double mean = k.dot(ldlt.solve(outputs_.head(size_)));
  const double var = params_.prior_variance - k.dot(ldlt.solve(k));
  return {mean, ClampVariance(var, params_.prior_variance)};
}

MeanSnapshot::MeanSnapshot(
    const std::array<const IncrementalGp*, 3>& models) {
  const IncrementalGp& lead = *models[0];
  if (lead.params().dim() != 3) {
    throw ConfigError("mean snapshot expects 3-D inputs");
  }
  count_ = lead.size();
  prior_variance_ = lead.params().prior_variance;
  inv_length_sq_ = lead.params().length_scales.array().square().inverse();
  inputs_ = lead.inputs();
  weights_.resize(count_, 3);
  for (int a = 0; a < 3; ++a) {
    if (models[a]->size() != count_) {
      throw StateError("mean snapshot models disagree on dataset size");
    }
    weights_.col(a) = models[a]->weights();
  }
}

Eigen::Vector3d MeanSnapshot::Mean(const Eigen::Vector3d& x) const {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int i = 0; i < count_; ++i) {
    const Eigen::Vector3d d = inputs_.col(i) - x;
    const double k =
        prior_variance_ *
        std::exp(-0.5 * d.cwiseAbs2().dot(inv_length_sq_));
    out += k * weights_.row(i).transpose();
  }
  return out;
}

DisturbanceModel::DisturbanceModel(const KernelParams& params, int capacity,
                                   int refresh_interval) {
  if (params.dim() != 3)
    throw ConfigError("disturbance model expects 3-D velocity inputs");
  axes_.reserve(3);
  for (int a = 0; a < 3; ++a) {
    axes_.emplace_back(params, capacity, refresh_interval);
  }
}

void DisturbanceModel::Update(const Eigen::Vector3d& x,
                              const Eigen::Vector3d& y) {
  for (int a = 0; a < 3; ++a) axes_[a].Update(x, y(a));
}

std::array<Prediction, 3> DisturbanceModel::Predict(
    const Eigen::Vector3d& x) const {
  return {axes_[0].Predict(x), axes_[1].Predict(x), axes_[2].Predict(x)};
}

MeanSnapshot DisturbanceModel::Snapshot() const {
  return MeanSnapshot({&axes_[0], &axes_[1], &axes_[2]});
}

}  // namespace lbcem::igp
