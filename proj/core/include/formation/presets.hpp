#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "formation/scenario.hpp"

namespace formation {

/// Built-in scenarios. All use gamma = 0.1, R = 2 m, d = 1 m, sigma = 0.1 m
/// and two tags per agent (ids 2a-1 and 2a on agent a) unless noted:
///
///   pair2       2 agents, full graph
///   line3       3 agents on a near-straight line (Monte-Carlo start)
///   triangle3   3 agents, generic start
///   square4     4 agents
///   five, ten   5 and 10 agents
///   sparse      4 agents, ring-shaped measurement graph
///   heading3d   4 agents, yaw + 3D translation
///   experiment  3 agents in a line, tags 17 cm apart
///   collinear   2 agents with all four tags on one line (unobservable)
///   coincident  2 agents with two tags at the same point
std::vector<std::string> preset_names();

/// Throws NotFound for unknown names.
Scenario make_preset(std::string_view name);

/// Near-line initializer: agents side by side, agent a at
/// (0, (a-1) * spacing) with heading 0.05 * (a-1) rad. With zero headings all
/// tags would lie on one line.
StateTuple near_line_state(GroupMode mode, int agent_count, double spacing);

}  // namespace formation
