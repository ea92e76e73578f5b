#pragma once

#include <optional>
#include <vector>

#include "formation/cost.hpp"
#include "formation/manifold.hpp"
#include "formation/ranging.hpp"
#include "formation/scenario.hpp"

namespace formation {

/// Eigen/singular values below this fraction of the largest count as zero.
inline constexpr double kRankThreshold = 1e-10;
/// Points per 1-sigma contour.
inline constexpr int kContourPoints = 64;

struct FisherInfo {
  Matrix matrix;                  // m(N-1) square, symmetric PSD
  int rank = 0;
  std::optional<double> log_det;  // empty when rank-deficient
  /// Orthonormal basis of the null space of the whitened Jacobian (columns),
  /// empty when full rank.
  Matrix null_space;

  bool full_rank() const { return log_det.has_value(); }
};

/// Information matrix H^T R^{-1} H at x. Propagates SingularGeometry.
FisherInfo fim(const StateTuple& x, const MeasurementModel& model);
FisherInfo fim(const StateTuple& x, const Scenario& scenario);

/// -ln det I(x); the infinite marker when I(x) is rank-deficient.
Cost j_est(const FisherInfo& info);
Cost j_est(const StateTuple& x, const MeasurementModel& model);
Cost j_est(const StateTuple& x, const Scenario& scenario);

/// Inverse of a full-rank information matrix; throws ObservabilityError.
Matrix fim_inverse(const FisherInfo& info);

/// One unit null direction of a rank-deficient information matrix.
Vector null_direction(const FisherInfo& info);

/// 1-sigma position uncertainty of one agent, resolved in agent 1's frame.
struct CrlbEllipse {
  int agent_id = 0;
  Vector center;                // m
  Matrix covariance;            // n x n, m^2
  std::vector<Vector> contour;  // kContourPoints points at 1 sigma

  /// sqrt(lambda_max / lambda_min) of the covariance.
  double eccentricity() const;
  /// Area (2D) of the ellipse spanned by the two largest principal axes.
  double area() const;
};

/// Per-agent (2..N) ellipses from the translation blocks of I^{-1}. In 3D the
/// contour lies in the plane of the two largest principal axes.
std::vector<CrlbEllipse> crlb(const StateTuple& x, const MeasurementModel& model);
std::vector<CrlbEllipse> crlb(const StateTuple& x, const Scenario& scenario);

}  // namespace formation
