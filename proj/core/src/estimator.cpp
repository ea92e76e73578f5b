#include "formation/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include <Eigen/Dense>
#include <json.hpp>

#include "formation/formation_opt.hpp"

namespace formation {

namespace {

struct LinearSystem {
  Vector residual;  // whitened
  Matrix jacobian;  // whitened
};

void check_prior(const std::optional<AttitudePrior>& prior, const StateTuple& x) {
  if (!prior) return;
  const auto agents = static_cast<std::size_t>(x.agent_count() - 1);
  if (prior->mean.size() != agents || prior->covariance.size() != agents) {
    throw InvalidArgument("attitude prior must have one entry per agent 2..N");
  }
}

// Whitening factor W with W^T W = P^{-1}.
Matrix whitening(const Matrix& covariance) {
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) throw InvalidArgument("prior covariance is not positive definite");
  const Matrix lower = llt.matrixL();
  return lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(covariance.rows(), covariance.cols()));
}

Vector prior_residual(GroupMode mode, const Matrix& prior_mean, const Matrix& rotation) {
  return rotation_log(mode, prior_mean.transpose() * rotation);
}

LinearSystem linearize(const MeasurementVector& y, const MeasurementModel& model,
                       const std::optional<AttitudePrior>& prior, const StateTuple& x) {
  const GroupMode mode = x.mode();
  const int m = tangent_dim(mode), rd = rotation_dof(mode);
  const auto agents = x.agent_count() - 1;
  const Eigen::Index prior_rows = prior ? agents * rd : 0;
  const auto meas_rows = static_cast<Eigen::Index>(model.edge_count());

  LinearSystem sys;
  sys.residual.resize(prior_rows + meas_rows);
  sys.jacobian = Matrix::Zero(prior_rows + meas_rows, x.tangent_size());
  if (prior) {
    for (int a = 0; a < agents; ++a) {
      const Vector e = prior_residual(mode, prior->mean[static_cast<std::size_t>(a)], x.poses()[static_cast<std::size_t>(a)].rotation());
      const Matrix w = whitening(prior->covariance[static_cast<std::size_t>(a)]);
      sys.residual.segment(a * rd, rd) = w * e;
      sys.jacobian.block(a * rd, a * m, rd, rd) = w * rotation_right_jacobian_inverse(mode, e);
    }
  }
  const Vector inv_sigma = y.sigmas.cwiseInverse();
  sys.residual.tail(meas_rows) = inv_sigma.cwiseProduct(model.ranges(x) - y.values);
  sys.jacobian.bottomRows(meas_rows) = inv_sigma.asDiagonal() * model.stack_jacobian(x);
  return sys;
}

double objective_or_inf(const MeasurementVector& y, const MeasurementModel& model,
                        const std::optional<AttitudePrior>& prior, const StateTuple& x) {
  try {
    return estimation_objective(y, model, prior, x);
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

double estimation_objective(const MeasurementVector& y, const MeasurementModel& model,
                            const std::optional<AttitudePrior>& prior, const StateTuple& x) {
  check_prior(prior, x);
  double total = 0.0;
  if (prior) {
    for (std::size_t a = 0; a < x.poses().size(); ++a) {
      const Vector e = prior_residual(x.mode(), prior->mean[a], x.poses()[a].rotation());
      total += 0.5 * (whitening(prior->covariance[a]) * e).squaredNorm();
    }
  }
  const Vector r = (model.ranges(x) - y.values).cwiseQuotient(y.sigmas);
  return total + 0.5 * r.squaredNorm();
}

GaussNewtonResult gauss_newton(const MeasurementVector& y, const MeasurementModel& model,
                               const std::optional<AttitudePrior>& prior, const StateTuple& x0,
                               const GaussNewtonOptions& options) {
  check_prior(prior, x0);
  if (y.values.size() != static_cast<Eigen::Index>(model.edge_count())) {
    throw InvalidArgument("gauss_newton: measurement vector does not match the graph");
  }
  StateTuple x = x0;
  double current = estimation_objective(y, model, prior, x);

  for (int iter = 1; iter <= options.max_iters; ++iter) {
    const LinearSystem sys = linearize(y, model, prior, x);
    const Matrix normal = sys.jacobian.transpose() * sys.jacobian;
    const Vector rhs = -sys.jacobian.transpose() * sys.residual;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(normal);
    const Vector& lambda = eig.eigenvalues();
    if (lambda(0) <= 1e-12 * std::max(lambda(lambda.size() - 1), 1e-300)) {
      throw EstimatorSingular("gauss_newton: normal equations are rank-deficient at iteration " +
                              std::to_string(iter));
    }
    const Vector full_step = eig.eigenvectors() *
                             (eig.eigenvectors().transpose() * rhs).cwiseQuotient(lambda);

    Vector step = full_step;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, step *= 0.5) {
      StateTuple candidate = oplus(x, step);
      const double value = objective_or_inf(y, model, prior, candidate);
      if (value <= current) {
        x = std::move(candidate);
        current = value;
        accepted = true;
        break;
      }
    }
    // No halving decreases the objective: x is a minimizer to working precision.
    if (!accepted || step.norm() < options.step_tol) return {x, iter, current};
  }
  throw MaxIterationsError(x, "gauss_newton: no convergence after " + std::to_string(options.max_iters) +
                                  " iterations");
}

Vector tangent_error(const StateTuple& truth, const StateTuple& estimate) {
  if (truth.mode() != estimate.mode() || truth.agent_count() != estimate.agent_count()) {
    throw InvalidArgument("tangent_error: mode or agent count mismatch");
  }
  const int m = tangent_dim(truth.mode());
  Vector e(truth.tangent_size());
  for (std::size_t a = 0; a < truth.poses().size(); ++a) {
    e.segment(static_cast<Eigen::Index>(a) * m, m) =
        log_map(truth.mode(), truth.poses()[a].inverse() * estimate.poses()[a]);
  }
  return e;
}

double mse(std::span<const TrialPair> trials) {
  if (trials.empty()) throw InvalidArgument("mse: no trials");
  double total = 0.0;
  for (const auto& t : trials) total += tangent_error(t.truth, t.estimate).squaredNorm();
  return total / static_cast<double>(trials.size());
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("spearman: need two equal-length series");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const Eigen::Map<const Vector> va(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Vector> vb(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Vector ca = va.array() - va.mean();
  const Vector cb = vb.array() - vb.mean();
  const double denom = ca.norm() * cb.norm();
  return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t checkpoint, std::uint64_t trial) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ checkpoint) ^ trial);
}

bool MonteCarloReport::ok() const {
  return std::none_of(checkpoints.begin(), checkpoints.end(), [](const CheckpointStats& c) { return c.failed; });
}

TrialInput draw_trial(const StateTuple& truth, const MeasurementModel& model, double prior_sigma,
                      double translation_jitter, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const GroupMode mode = truth.mode();
  const int rd = rotation_dof(mode), n = space_dim(mode);

  MeasurementVector y = model.synthesize(truth, rng);
  AttitudePrior prior;
  std::vector<Pose> initial;
  for (const Pose& p : truth.poses()) {
    Vector w(rd);
    for (int i = 0; i < rd; ++i) w(i) = prior_sigma * normal(rng);
    Matrix mean = project_rotation(mode, p.rotation() * rotation_exp(mode, w));
    Vector t = p.translation();
    for (int i = 0; i < n; ++i) t(i) += translation_jitter * normal(rng);
    initial.emplace_back(mean, t);
    prior.mean.push_back(std::move(mean));
    prior.covariance.push_back(Matrix::Identity(rd, rd) * prior_sigma * prior_sigma);
  }
  return {std::move(y), std::move(prior), StateTuple(mode, std::move(initial))};
}

namespace {

struct TrialOutcome {
  Vector error;
  double position_error = 0.0;
  double heading_error = 0.0;
};

std::optional<TrialOutcome> run_trial(const StateTuple& truth, const MeasurementModel& model,
                                      const MonteCarloOptions& options, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const GroupMode mode = truth.mode();
  TrialInput input = draw_trial(truth, model, options.prior_sigma, options.translation_jitter, rng);
  try {
    const GaussNewtonResult est =
        gauss_newton(input.measurements, model, input.prior, input.initial, options.gauss_newton);
    TrialOutcome out;
    out.error = tangent_error(truth, est.state);
    const auto agents = truth.poses().size();
    for (std::size_t a = 0; a < agents; ++a) {
      const Pose& t = truth.poses()[a];
      const Pose& e = est.state.poses()[a];
      out.position_error += (e.translation() - t.translation()).norm();
      out.heading_error += rotation_log(mode, t.rotation().transpose() * e.rotation()).norm();
    }
    out.position_error /= static_cast<double>(agents);
    out.heading_error /= static_cast<double>(agents);
    return out;
  } catch (const EstimatorSingular&) {
  } catch (const MaxIterationsError&) {
  } catch (const DomainError&) {
  } catch (const SingularGeometry&) {
  }
  return std::nullopt;
}

}  // namespace

MonteCarloReport monte_carlo(std::span<const Checkpoint> checkpoints, const Scenario& scenario,
                             const MonteCarloOptions& options) {
  if (options.trials < 1) throw InvalidArgument("monte_carlo: need at least one trial");
  const MeasurementModel model(scenario);
  const BarrierParams barrier_params = BarrierParams::from(scenario.optimizer);
  const unsigned threads = std::max(1u, options.threads);

  MonteCarloReport report;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const StateTuple& truth = checkpoints[c].state;
    std::vector<std::optional<TrialOutcome>> outcomes(static_cast<std::size_t>(options.trials));
    auto worker = [&](unsigned offset) {
      for (std::size_t k = offset; k < outcomes.size(); k += threads) {
        outcomes[k] = run_trial(truth, model, options, stream_seed(options.seed, c, k));
      }
    };
    if (threads == 1) {
      worker(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    }

    CheckpointStats stats;
    stats.id = checkpoints[c].id;
    const CostBreakdown cost = evaluate_cost(truth, model, barrier_params);
    stats.j_est = cost.j_est;
    stats.j_col = cost.j_col;
    stats.j_total = cost.j_total;
    stats.trials = options.trials;

    const Eigen::Index dim = truth.tangent_size();
    stats.mean_error = Vector::Zero(dim);
    stats.sample_covariance = Matrix::Zero(dim, dim);
    int ok = 0;
    double sq = 0.0, pos = 0.0, head = 0.0;
    for (const auto& o : outcomes) {
      if (!o) continue;
      ++ok;
      sq += o->error.squaredNorm();
      pos += o->position_error;
      head += o->heading_error;
      stats.mean_error += o->error;
    }
    stats.trials_failed = options.trials - ok;
    if (ok > 0) {
      stats.mse = sq / ok;
      stats.mean_position_error = pos / ok;
      stats.mean_heading_error = head / ok;
      stats.mean_error /= ok;
    }
    if (ok > 1) {
      for (const auto& o : outcomes) {
        if (!o) continue;
        const Vector d = o->error - stats.mean_error;
        stats.sample_covariance += d * d.transpose();
      }
      stats.sample_covariance /= (ok - 1);
    }
    stats.failed = ok == 0 || stats.trials_failed > options.max_failure_rate * options.trials;
    report.checkpoints.push_back(std::move(stats));
  }
  return report;
}

CsvWriter report_csv(const MonteCarloReport& report) {
  CsvWriter csv({"checkpoint", "J_est", "J_col", "J_total", "MSE", "mean_pos_err", "mean_heading_err",
                 "trials_failed"});
  for (const auto& c : report.checkpoints) {
    csv.add_row({std::to_string(c.id), c.j_est.to_string(), format_double(c.j_col), c.j_total.to_string(),
                 format_double(c.mse), format_double(c.mean_position_error),
                 format_double(c.mean_heading_error), std::to_string(c.trials_failed)});
  }
  return csv;
}

std::string report_json(const MonteCarloReport& report) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& c : report.checkpoints) {
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index r = 0; r < c.sample_covariance.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index k = 0; k < c.sample_covariance.cols(); ++k) row.push_back(c.sample_covariance(r, k));
      cov.push_back(row);
    }
    doc.push_back({{"checkpoint", c.id},
                   {"J_est", c.j_est.to_string()},
                   {"J_col", c.j_col},
                   {"J_total", c.j_total.to_string()},
                   {"MSE", c.mse},
                   {"mean_pos_err", c.mean_position_error},
                   {"mean_heading_err", c.mean_heading_error},
                   {"trials", c.trials},
                   {"trials_failed", c.trials_failed},
                   {"failed", c.failed},
                   {"sample_covariance", cov}});
  }
  return nlohmann::json{{"checkpoints", doc}}.dump(2) + "\n";
}

}  // namespace formation
