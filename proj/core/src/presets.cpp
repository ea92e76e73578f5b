#include "formation/presets.hpp"

#include <cmath>
#include <numbers>

#include "formation/errors.hpp"

namespace formation {

namespace {

constexpr double kSigma = 0.1;

std::vector<TagLayout> two_tags_per_agent(GroupMode mode, int agents, double forward, double lateral) {
  std::vector<TagLayout> tags;
  const int n = space_dim(mode);
  for (int a = 1; a <= agents; ++a) {
    Vector left = Vector::Zero(n), right = Vector::Zero(n);
    left(0) = forward;
    left(1) = lateral;
    right(0) = forward;
    right(1) = -lateral;
    tags.push_back({2 * a - 1, a, left});
    tags.push_back({2 * a, a, right});
  }
  return tags;
}

Pose planar_pose(GroupMode mode, double heading, double x, double y, double z = 0.0) {
  const int n = space_dim(mode);
  Vector t(n);
  if (n == 2) {
    t << x, y;
  } else {
    t << x, y, z;
  }
  return Pose(rotation_exp(mode, Vector::Constant(1, heading)), t);
}

Scenario base(std::string name, GroupMode mode, int agents, std::vector<Pose> poses) {
  Scenario s;
  s.name = std::move(name);
  s.mode = mode;
  s.agent_count = agents;
  s.tags = two_tags_per_agent(mode, agents, 0.2, 0.2);
  s.graph = fully_connected_graph(s.tags, kSigma);
  s.initial_state = StateTuple(mode, std::move(poses));
  s.seed = 1;
  return s;
}

Scenario finish(Scenario s) {
  s.validate();
  return s;
}

// Agents on a circle of radius `radius` through agent 1, each facing the
// centre, headings nudged by 0.05 rad per agent.
std::vector<Pose> ring_poses(GroupMode mode, int agents, double radius, const std::vector<double>& heights = {}) {
  std::vector<Pose> poses;
  for (int a = 2; a <= agents; ++a) {
    const double phi = std::numbers::pi * (1.0 + 2.0 * (a - 1) / agents);
    const double heading = std::remainder(phi + std::numbers::pi + 0.05 * (a - 1), 2.0 * std::numbers::pi);
    const double z = heights.empty() ? 0.0 : heights[a - 2];
    poses.push_back(planar_pose(mode, heading, radius * (1.0 + std::cos(phi)), radius * std::sin(phi), z));
  }
  return poses;
}

}  // namespace

StateTuple near_line_state(GroupMode mode, int agent_count, double spacing) {
  std::vector<Pose> poses;
  for (int a = 2; a <= agent_count; ++a) {
    poses.push_back(planar_pose(mode, 0.05 * (a - 1), 0.0, spacing * (a - 1)));
  }
  return StateTuple(mode, std::move(poses));
}

std::vector<std::string> preset_names() {
  return {"pair2",     "line3",      "triangle3", "square4",   "five",      "ten",
          "sparse",    "heading3d",  "experiment", "collinear", "coincident"};
}

Scenario make_preset(std::string_view name) {
  const GroupMode se2 = GroupMode::SE2;
  if (name == "pair2") {
    return finish(base("pair2", se2, 2, {planar_pose(se2, 0.3, 2.5, 0.4)}));
  }
  if (name == "line3") {
    return finish(base("line3", se2, 3, near_line_state(se2, 3, 2.0).poses()));
  }
  if (name == "triangle3") {
    return finish(base("triangle3", se2, 3, ring_poses(se2, 3, 1.3)));
  }
  if (name == "square4") {
    return finish(base("square4", se2, 4, ring_poses(se2, 4, 1.6)));
  }
  if (name == "five") {
    return finish(base("five", se2, 5, ring_poses(se2, 5, 1.9)));
  }
  if (name == "ten") {
    return finish(base("ten", se2, 10, ring_poses(se2, 10, 3.5)));
  }
  if (name == "sparse") {
    Scenario s = base("sparse", se2, 4, ring_poses(se2, 4, 1.6));
    // Ring 1-2-3-4-1: every tag pair between neighbouring agents.
    std::vector<Edge> edges;
    for (int a = 1; a <= 4; ++a) {
      const int b = a % 4 + 1;
      for (int ti : {2 * a - 1, 2 * a})
        for (int tj : {2 * b - 1, 2 * b}) edges.push_back({ti, tj, kSigma});
    }
    s.graph = MeasurementGraph(std::move(edges));
    return finish(std::move(s));
  }
  if (name == "heading3d") {
    const GroupMode h = GroupMode::SE3Heading;
    return finish(base("heading3d", h, 4, ring_poses(h, 4, 1.6, {0.3, -0.2, 0.1})));
  }
  if (name == "experiment") {
    Scenario s = base("experiment", se2, 3, near_line_state(se2, 3, 2.0).poses());
    s.tags = two_tags_per_agent(se2, 3, 0.0, 0.085);
    s.graph = fully_connected_graph(s.tags, kSigma);
    return finish(std::move(s));
  }
  if (name == "collinear") {
    // Agent 2 beside agent 1 with the same heading: all four tags on x = 0.2.
    return finish(base("collinear", se2, 2, {planar_pose(se2, 0.0, 0.0, 3.0)}));
  }
  if (name == "coincident") {
    // Agent 2's tag 4 lands exactly on agent 1's tag 1.
    return finish(base("coincident", se2, 2, {planar_pose(se2, 0.0, 0.0, 0.4)}));
  }
  throw NotFound("unknown preset '" + std::string(name) + "'");
}

}  // namespace formation
