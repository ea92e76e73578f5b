#pragma once

#include <cmath>
#include <vector>

#include "formation/manifold.hpp"
#include "formation/presets.hpp"
#include "formation/scenario.hpp"

namespace fixtures {

using namespace formation;

inline Pose planar(GroupMode mode, double heading, double x, double y, double z = 0.0) {
  const int n = space_dim(mode);
  Vector t(n);
  if (n == 2) {
    t << x, y;
  } else {
    t << x, y, z;
  }
  return Pose(rotation_exp(mode, Vector::Constant(1, heading)), t);
}

/// Two tags per agent at (0.2, +-0.2[, 0]), ids 2a-1 and 2a, full graph.
inline Scenario two_tag_scenario(GroupMode mode, std::vector<Pose> poses, double sigma = 0.1) {
  Scenario s;
  s.name = "fixture";
  s.mode = mode;
  s.agent_count = static_cast<int>(poses.size()) + 1;
  const int n = space_dim(mode);
  for (int a = 1; a <= s.agent_count; ++a) {
    Vector left = Vector::Zero(n), right = Vector::Zero(n);
    left(0) = right(0) = 0.2;
    left(1) = 0.2;
    right(1) = -0.2;
    s.tags.push_back({2 * a - 1, a, left});
    s.tags.push_back({2 * a, a, right});
  }
  s.graph = fully_connected_graph(s.tags, sigma);
  s.initial_state = StateTuple(mode, std::move(poses));
  s.validate();
  return s;
}

inline Scenario three_agent(GroupMode mode) {
  if (mode == GroupMode::SE2) return make_preset("triangle3");
  if (mode == GroupMode::SE3Heading) {
    return two_tag_scenario(mode, {planar(mode, 0.3, 1.8, 0.2, 0.3), planar(mode, -0.5, 0.4, 1.7, -0.2)});
  }
  Vector t1(3), t2(3);
  t1 << 1.8, 0.2, 0.3;
  t2 << 0.4, 1.7, -0.2;
  Vector r1(3), r2(3);
  r1 << 0.1, -0.2, 0.3;
  r2 << -0.3, 0.2, -0.5;
  return two_tag_scenario(mode, {Pose(rotation_exp(mode, r1), t1), Pose(rotation_exp(mode, r2), t2)});
}

}  // namespace fixtures
