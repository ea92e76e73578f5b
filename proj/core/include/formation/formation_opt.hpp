#pragma once

#include <functional>
#include <vector>

#include "formation/cost.hpp"
#include "formation/csv.hpp"
#include "formation/errors.hpp"
#include "formation/manifold.hpp"
#include "formation/ranging.hpp"
#include "formation/scenario.hpp"

namespace formation {

/// Candidates this close to the barrier pole are rejected, never evaluated.
inline constexpr double kPoleGuard = 1e-9;
/// Line search accepts a candidate whose cost exceeds the current one by at
/// most this much.
inline constexpr double kAcceptSlack = 1e-12;
inline constexpr int kMaxHalvings = 30;

struct BarrierParams {
  double activation_radius = 2.0;  // R
  double safety_radius = 1.0;      // d

  static BarrierParams from(const OptimizerParams& p) { return {p.activation_radius, p.safety_radius}; }
};

/// Collision barrier as a function of the reference-point distance:
///   (min{0, (r^2 - R^2) / (r^2 - d^2)})^2
/// Throws BarrierPole within kPoleGuard of d and InfeasibleState below d.
double barrier(double distance, const BarrierParams& params);

/// Barrier between the reference points of agents alpha and beta.
double j_col_pair(const StateTuple& x, const BarrierParams& params, int alpha, int beta);

/// Sum over ordered pairs alpha != beta, so each unordered pair counts twice.
double j_col(const StateTuple& x, const BarrierParams& params);

struct CostBreakdown {
  Cost j_est;
  double j_col = 0.0;
  Cost j_total;
};

/// J = J_est + J_col. Barrier errors propagate.
CostBreakdown evaluate_cost(const StateTuple& x, const MeasurementModel& model, const BarrierParams& params);
Cost j_total(const StateTuple& x, const Scenario& scenario);

/// Same as evaluate_cost but every geometric failure (barrier pole,
/// infeasible state, coincident tags) becomes the infinite marker.
Cost probe_cost(const StateTuple& x, const MeasurementModel& model, const BarrierParams& params);

/// Central finite differences of `cost` along each tangent basis direction.
/// A coordinate whose probe is infinite on one side falls back to a one-sided
/// difference against `cost(x)`; infinite on both sides throws GradientError.
Vector tangent_gradient(const StateTuple& x, const std::function<Cost(const StateTuple&)>& cost, double h);

/// Gradient of J_total on the tangent space with step scenario.optimizer.fd_step.
Vector gradient(const StateTuple& x, const Scenario& scenario);

struct DescentRecord {
  int iter = 0;
  Cost j_est;
  double j_col = 0.0;
  Cost j_total;
  double gradient_norm = 0.0;
  double step_scale = 0.0;  // gamma_eff that produced this iterate; 0 for the start
  StateTuple state{GroupMode::SE2, {}};
};

using DescentTrace = std::vector<DescentRecord>;

/// Line search exhausted its halvings. The trace up to the stall is attached.
class StallError : public Error {
 public:
  StallError(DescentTrace trace, const std::string& what) : Error(what), trace_(std::move(trace)) {}
  const DescentTrace& trace() const noexcept { return trace_; }

 private:
  DescentTrace trace_;
};

struct DescentResult {
  StateTuple final_state{GroupMode::SE2, {}};
  DescentTrace trace;
  bool converged = false;  // gradient tolerance reached before max_iters
};

/// On-manifold gradient descent x <- x (+) (-gamma_eff * grad J(x)) from the
/// scenario's initial state, halving gamma_eff until the candidate is finite
/// and does not increase the cost.
DescentResult descend(const Scenario& scenario);

/// CSV with columns iter, J_est, J_col, J_total, grad_norm, step_scale.
CsvWriter trace_csv(const DescentTrace& trace);

/// `count` evenly spaced indices into a trace of `size` records, always
/// including the first and last record.
std::vector<std::size_t> checkpoint_indices(std::size_t size, int count);

/// Pairwise reference-point distances (including agent 1), i < j order.
std::vector<double> pairwise_distances(const StateTuple& x);

}  // namespace formation
