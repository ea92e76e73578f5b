#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "formation/manifold.hpp"
#include "formation/scenario.hpp"

namespace formation {

/// Ranges closer than this make the direction vector undefined.
inline constexpr double kMinRange = 1e-9;

/// Stacked ranges in canonical edge order with their diagonal covariance.
struct MeasurementVector {
  Vector values;  // m
  Vector sigmas;  // m; covariance = diag(sigmas^2)

  Matrix covariance() const { return sigmas.array().square().matrix().asDiagonal(); }
};

/// One edge resolved against the scenario: owning agents and homogeneous
/// body-frame tag points.
struct ResolvedEdge {
  int tag_i = 0;
  int tag_j = 0;
  int agent_alpha = 0;  // owner of tag_i
  int agent_beta = 0;   // owner of tag_j
  Vector p_i;           // (n+1)-vector, last entry 1
  Vector p_j;
  double sigma = 0.0;
};

/// Partial derivatives of one range with respect to the right perturbations of
/// the two owning agents' poses.
struct JacobianBlocks {
  RowVector alpha;  // 1 x m, d y_ij / d xi_alpha
  RowVector beta;   // 1 x m, d y_ij / d xi_beta
  Vector direction; // unit vector from tag j to tag i, agent-1 frame
};

/// Range measurement model g(x) for a fixed scenario.
///
/// Range for edge (i, j) with alpha = l(i), beta = l(j):
///   y_ij = || D T_1alpha p_i - D T_1beta p_j ||
/// Analytic derivative with rho the unit direction between the tags:
///   dy/dxi_alpha =  rho^T C_1alpha odot(p_i)_top
///   dy/dxi_beta  = -rho^T C_1beta  odot(p_j)_top
/// Agent 1 carries no state; its block is dropped from the stacked Jacobian.
class MeasurementModel {
 public:
  explicit MeasurementModel(const Scenario& scenario);

  GroupMode mode() const { return mode_; }
  int agent_count() const { return agent_count_; }
  std::size_t edge_count() const { return edges_.size(); }
  const ResolvedEdge& edge(std::size_t k) const { return edges_.at(k); }
  const std::vector<ResolvedEdge>& edges() const { return edges_; }
  Vector sigmas() const;

  /// Tag position in agent 1's frame.
  Vector tag_position(const StateTuple& x, int agent_id, const Vector& p_homogeneous) const;

  double range(const StateTuple& x, std::size_t k) const;
  Vector ranges(const StateTuple& x) const;

  /// Throws SingularGeometry when the range is below kMinRange.
  JacobianBlocks jacobian_blocks(const StateTuple& x, std::size_t k) const;

  /// |E| x m(N-1) Jacobian. Row k carries the alpha block at block column
  /// alpha-2 and the beta block at beta-2 (omitted when the agent is 1).
  Matrix stack_jacobian(const StateTuple& x) const;

  /// g(x) + v, v ~ N(0, diag(sigma^2)).
  MeasurementVector synthesize(const StateTuple& x, std::mt19937_64& rng) const;

 private:
  void check_state(const StateTuple& x) const;

  GroupMode mode_;
  int agent_count_;
  std::vector<ResolvedEdge> edges_;
};

/// Central finite-difference Jacobian of the stacked ranges over the right
/// perturbation, step `h` on every tangent coordinate.
Matrix finite_difference_jacobian(const MeasurementModel& model, const StateTuple& x, double h);

/// max |analytic - numeric| / max |numeric| over all entries.
double jacobian_relative_error(const Matrix& analytic, const Matrix& numeric);

}  // namespace formation
