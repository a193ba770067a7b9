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

#include "core/world.h"

#include <cmath>

namespace lbcem {

std::vector<DetectedObstacle> Detect(const Eigen::Vector3d& p,
                                     std::span<const Obstacle> obstacles,
                                     double t, double sensing_range) {
  std::vector<DetectedObstacle> out;
  for (int i = 0; i < static_cast<int>(obstacles.size()); ++i) {
    const Obstacle& o = obstacles[i];
    const double r = o.SurfaceDistance(p, t);
    if (r <= sensing_range) {
      Obstacle now = o;
      now.center = o.PositionAt(t);
      out.push_back({i, now, r});
    }
  }
  return out;
}

DesiredState SpiralReference::At(double t) const {
  const double s = std::sin(angular_rate * t);
  const double c = std::cos(angular_rate * t);
  const double w = angular_rate;
  DesiredState d;
  d.p = {radius * s, radius - radius * c, climb_rate * t};
  d.v = {radius * w * c, radius * w * s, climb_rate};
  d.a = {-radius * w * w * s, radius * w * w * c, 0.0};
  return d;
}

}  // namespace lbcem
