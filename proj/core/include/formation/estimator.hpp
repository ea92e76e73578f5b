#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "formation/cost.hpp"
#include "formation/csv.hpp"
#include "formation/errors.hpp"
#include "formation/manifold.hpp"
#include "formation/ranging.hpp"
#include "formation/scenario.hpp"

namespace formation {

/// Per-agent (2..N) attitude prior; index 0 is agent 2. Covariances are
/// rotation_dof x rotation_dof in rad^2.
struct AttitudePrior {
  std::vector<Matrix> mean;
  std::vector<Matrix> covariance;
};

struct GaussNewtonOptions {
  int max_iters = 100;
  double step_tol = 1e-8;
  int max_halvings = 10;
};

struct GaussNewtonResult {
  StateTuple state{GroupMode::SE2, {}};
  int iterations = 0;
  double objective = 0.0;
};

/// Gauss-Newton ran out of iterations; carries the last iterate.
class MaxIterationsError : public Error {
 public:
  MaxIterationsError(StateTuple last, const std::string& what) : Error(what), last_(std::move(last)) {}
  const StateTuple& last_iterate() const noexcept { return last_; }

 private:
  StateTuple last_;
};

/// 1/2 sum ||log(C^T C_prior)||^2_P + 1/2 ||y - g(x)||^2_R.
double estimation_objective(const MeasurementVector& y, const MeasurementModel& model,
                            const std::optional<AttitudePrior>& prior, const StateTuple& x);

/// Right-perturbation Gauss-Newton on the objective above, with step halving
/// when a full step would increase it. Without a prior only the range term is
/// minimized.
GaussNewtonResult gauss_newton(const MeasurementVector& y, const MeasurementModel& model,
                               const std::optional<AttitudePrior>& prior, const StateTuple& x0,
                               const GaussNewtonOptions& options = {});

/// Stacked log(T_true^{-1} T_est) over agents 2..N.
Vector tangent_error(const StateTuple& truth, const StateTuple& estimate);

/// Inputs of one synthetic estimation trial.
struct TrialInput {
  MeasurementVector measurements;
  AttitudePrior prior;
  StateTuple initial;
};

/// Ranges g(truth) + v, a prior C_true exp(w) with w ~ N(0, prior_sigma^2) per
/// agent, and an initial guess at the prior mean with the true translation
/// jittered by N(0, translation_jitter^2) per axis.
TrialInput draw_trial(const StateTuple& truth, const MeasurementModel& model, double prior_sigma,
                      double translation_jitter, std::mt19937_64& rng);

struct TrialPair {
  StateTuple truth;
  StateTuple estimate;
};

/// Mean over trials of the squared stacked tangent error.
double mse(std::span<const TrialPair> trials);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

/// Independent RNG stream seed for (seed, checkpoint, trial).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t checkpoint, std::uint64_t trial);

struct Checkpoint {
  int id = 0;  // trace iteration
  StateTuple state{GroupMode::SE2, {}};
};

struct MonteCarloOptions {
  int trials = 2000;
  double prior_sigma = 0.08;        // rad
  double translation_jitter = 0.5;  // m
  std::uint64_t seed = 1;
  unsigned threads = 1;
  GaussNewtonOptions gauss_newton;
  /// Maximum tolerated fraction of failed trials per checkpoint.
  double max_failure_rate = 0.05;
};

struct CheckpointStats {
  int id = 0;
  Cost j_est;
  double j_col = 0.0;
  Cost j_total;
  double mse = 0.0;
  double mean_position_error = 0.0;  // m, mean over trials and agents
  double mean_heading_error = 0.0;   // rad
  int trials = 0;
  int trials_failed = 0;
  Matrix sample_covariance;          // of the stacked tangent error
  Vector mean_error;                 // stacked tangent error mean
  bool failed = false;               // failure rate above the threshold
};

struct MonteCarloReport {
  std::vector<CheckpointStats> checkpoints;

  bool ok() const;
};

/// K independent trials per checkpoint: synthesize ranges, draw an attitude
/// prior around the true rotations, start Gauss-Newton from the prior mean with
/// jittered true translations, and accumulate the errors.
MonteCarloReport monte_carlo(std::span<const Checkpoint> checkpoints, const Scenario& scenario,
                             const MonteCarloOptions& options);

CsvWriter report_csv(const MonteCarloReport& report);
std::string report_json(const MonteCarloReport& report);

}  // namespace formation
