#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "formation/manifold.hpp"

namespace formation {

/// A ranging tag rigidly mounted on an agent.
struct TagLayout {
  int tag_id = 0;
  int agent_id = 0;
  Vector body_position;  // meters, owning agent's body frame
};

/// Unordered range measurement between two tags, stored with tag_i < tag_j.
struct Edge {
  int tag_i = 0;
  int tag_j = 0;
  double sigma = 0.0;  // meters

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Edges in canonical order, sorted by (tag_i, tag_j). Construction rejects
/// self edges, duplicates and non-positive sigmas; ownership checks live in
/// Scenario::validate().
class MeasurementGraph {
 public:
  MeasurementGraph() = default;
  explicit MeasurementGraph(std::vector<Edge> edges);

  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }

  friend bool operator==(const MeasurementGraph&, const MeasurementGraph&) = default;

 private:
  std::vector<Edge> edges_;
};

struct OptimizerParams {
  double gamma = 0.1;
  double activation_radius = 2.0;  // R
  double safety_radius = 1.0;      // d
  int max_iters = 5000;
  double grad_tol = 1e-4;
  double fd_step = 1e-5;

  friend bool operator==(const OptimizerParams&, const OptimizerParams&) = default;
};

/// Monte-Carlo validation defaults; optional in scenario files.
struct EstimatorParams {
  double prior_sigma = 0.08;        // rad
  double translation_jitter = 0.5;  // m, std of the initial-guess translation noise
  int trials = 2000;
  int checkpoints = 10;

  friend bool operator==(const EstimatorParams&, const EstimatorParams&) = default;
};

struct Scenario {
  std::string name;
  GroupMode mode = GroupMode::SE2;
  int agent_count = 0;
  std::vector<TagLayout> tags;
  MeasurementGraph graph;
  OptimizerParams optimizer;
  EstimatorParams estimator;
  StateTuple initial_state{GroupMode::SE2, {}};
  std::uint64_t seed = 1;

  /// Owning agent of a tag. Throws NotFound for unknown ids.
  int lookup(int tag_id) const;
  const TagLayout& tag(int tag_id) const;
  std::vector<const TagLayout*> tags_of(int agent_id) const;

  /// Enforces every scenario invariant; throws ValidationError naming the field.
  void validate() const;
};

/// Every inter-agent tag pair exactly once with uniform sigma.
MeasurementGraph fully_connected_graph(const std::vector<TagLayout>& tags, double sigma);

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
std::string write_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// State document: {"mode": ..., "initial_state": [...]}; also accepts a full
/// scenario file (only the state is read).
StateTuple parse_state(const std::string& text);
StateTuple load_state(const std::filesystem::path& path);
std::string write_state(const StateTuple& state);

bool operator==(const Scenario& a, const Scenario& b);

}  // namespace formation
