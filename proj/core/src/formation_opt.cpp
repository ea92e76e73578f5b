#include "formation/formation_opt.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "formation/fisher.hpp"

namespace formation {

double barrier(double distance, const BarrierParams& params) {
  const double r = params.activation_radius, d = params.safety_radius;
  if (std::abs(distance - d) < kPoleGuard) {
    throw BarrierPole("inter-agent distance " + std::to_string(distance) + " is on the barrier pole");
  }
  if (distance < d) {
    throw InfeasibleState("inter-agent distance " + std::to_string(distance) +
                          " is inside the safety radius " + std::to_string(d));
  }
  const double d2 = distance * distance;
  const double ratio = std::min(0.0, (d2 - r * r) / (d2 - d * d));
  return ratio * ratio;
}

double j_col_pair(const StateTuple& x, const BarrierParams& params, int alpha, int beta) {
  if (alpha == beta) throw InvalidArgument("j_col_pair: alpha and beta must differ");
  return barrier((x.position(alpha) - x.position(beta)).norm(), params);
}

double j_col(const StateTuple& x, const BarrierParams& params) {
  double total = 0.0;
  for (int a = 1; a <= x.agent_count(); ++a) {
    for (int b = a + 1; b <= x.agent_count(); ++b) total += 2.0 * j_col_pair(x, params, a, b);
  }
  return total;
}

CostBreakdown evaluate_cost(const StateTuple& x, const MeasurementModel& model, const BarrierParams& params) {
  CostBreakdown c;
  c.j_col = j_col(x, params);
  c.j_est = j_est(x, model);
  c.j_total = c.j_est + c.j_col;
  return c;
}

Cost j_total(const StateTuple& x, const Scenario& scenario) {
  return evaluate_cost(x, MeasurementModel(scenario), BarrierParams::from(scenario.optimizer)).j_total;
}

Cost probe_cost(const StateTuple& x, const MeasurementModel& model, const BarrierParams& params) {
  try {
    return evaluate_cost(x, model, params).j_total;
  } catch (const BarrierPole&) {
  } catch (const InfeasibleState&) {
  } catch (const SingularGeometry&) {
  }
  return Cost::infinite();
}

Vector tangent_gradient(const StateTuple& x, const std::function<Cost(const StateTuple&)>& cost, double h) {
  const Eigen::Index dim = x.tangent_size();
  Vector g(dim);
  std::optional<Cost> center;
  for (Eigen::Index k = 0; k < dim; ++k) {
    Vector dx = Vector::Zero(dim);
    dx(k) = h;
    const Cost plus = cost(oplus(x, dx));
    const Cost minus = cost(oplus(x, -dx));
    if (plus.is_finite() && minus.is_finite()) {
      g(k) = (plus.value() - minus.value()) / (2.0 * h);
      continue;
    }
    if (plus.is_infinite() && minus.is_infinite()) {
      throw GradientError("gradient: cost is infinite on both sides of coordinate " + std::to_string(k));
    }
    if (!center) center = cost(x);
    if (center->is_infinite()) throw GradientError("gradient: cost is infinite at the expansion point");
    g(k) = plus.is_finite() ? (plus.value() - center->value()) / h : (center->value() - minus.value()) / h;
  }
  return g;
}

Vector gradient(const StateTuple& x, const Scenario& scenario) {
  const MeasurementModel model(scenario);
  const BarrierParams params = BarrierParams::from(scenario.optimizer);
  return tangent_gradient(
      x, [&](const StateTuple& s) { return probe_cost(s, model, params); }, scenario.optimizer.fd_step);
}

DescentResult descend(const Scenario& scenario) {
  const MeasurementModel model(scenario);
  const BarrierParams params = BarrierParams::from(scenario.optimizer);
  const OptimizerParams& opt = scenario.optimizer;
  auto cost_fn = [&](const StateTuple& s) { return probe_cost(s, model, params); };

  DescentResult result;
  StateTuple x = scenario.initial_state;
  CostBreakdown current = evaluate_cost(x, model, params);
  if (current.j_total.is_infinite()) {
    throw InvalidArgument("descend: initial state has infinite cost (unobservable formation)");
  }

  double step_scale = 0.0;
  for (int iter = 0;; ++iter) {
    const Vector g = tangent_gradient(x, cost_fn, opt.fd_step);
    const double gnorm = g.norm();
    result.trace.push_back({iter, current.j_est, current.j_col, current.j_total, gnorm, step_scale, x});
    if (gnorm < opt.grad_tol) {
      result.converged = true;
      break;
    }
    if (iter >= opt.max_iters) break;

    double scale = opt.gamma;
    bool accepted = false;
    for (int halving = 0; halving <= kMaxHalvings; ++halving, scale *= 0.5) {
      StateTuple candidate = oplus(x, -scale * g);
      const Cost c = cost_fn(candidate);
      if (c.is_finite() && c.value() <= current.j_total.value() + kAcceptSlack) {
        x = std::move(candidate);
        current = evaluate_cost(x, model, params);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw StallError(std::move(result.trace), "descend: line search stalled at iteration " +
                                                    std::to_string(iter) + " after " +
                                                    std::to_string(kMaxHalvings) + " halvings");
    }
    step_scale = scale;
  }
  result.final_state = x;
  return result;
}

CsvWriter trace_csv(const DescentTrace& trace) {
  CsvWriter csv({"iter", "J_est", "J_col", "J_total", "grad_norm", "step_scale"});
  for (const auto& r : trace) {
    csv.add_row({std::to_string(r.iter), r.j_est.to_string(), format_double(r.j_col), r.j_total.to_string(),
                 format_double(r.gradient_norm), format_double(r.step_scale)});
  }
  return csv;
}

std::vector<std::size_t> checkpoint_indices(std::size_t size, int count) {
  if (size == 0 || count < 1) return {};
  if (count == 1) return {size - 1};
  std::set<std::size_t> picked;
  for (int k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / (count - 1);
    picked.insert(static_cast<std::size_t>(std::llround(t * static_cast<double>(size - 1))));
  }
  return {picked.begin(), picked.end()};
}

std::vector<double> pairwise_distances(const StateTuple& x) {
  std::vector<double> d;
  for (int a = 1; a <= x.agent_count(); ++a) {
    for (int b = a + 1; b <= x.agent_count(); ++b) d.push_back((x.position(a) - x.position(b)).norm());
  }
  return d;
}

}  // namespace formation
