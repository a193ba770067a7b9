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

#ifndef LBCEM_CORE_WORLD_H_
#define LBCEM_CORE_WORLD_H_

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lbcem {

// Spherical obstacle moving with constant velocity. `center` is the
// position at t = 0.
struct Obstacle {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.3;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();

  Eigen::Vector3d PositionAt(double t) const { return center + velocity * t; }
  // Signed distance from p to the surface at time t.
  double SurfaceDistance(const Eigen::Vector3d& p, double t) const {
    return (p - PositionAt(t)).norm() - radius;
  }
};

struct DetectedObstacle {
  int index = 0;          // position in the world's obstacle list
  Obstacle obstacle;      // re-based so `center` is the position at detection
  double distance = 0.0;  // r_i at detection time
};

// Obstacles whose surface is within `sensing_range` of p at time t.
std::vector<DetectedObstacle> Detect(const Eigen::Vector3d& p,
                                     std::span<const Obstacle> obstacles,
                                     double t, double sensing_range);

struct DesiredState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
};

// p_d(t) = [R sin(wt), R - R cos(wt), c t], yaw reference 0.
struct SpiralReference {
  double radius = 2.0;
  double angular_rate = 0.5;
  double climb_rate = 0.2;

  DesiredState At(double t) const;
};

}  // namespace lbcem

#endif  // LBCEM_CORE_WORLD_H_
