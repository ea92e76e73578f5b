#include "formation/fisher.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "formation/errors.hpp"

namespace formation {

FisherInfo fim(const StateTuple& x, const MeasurementModel& model) {
  const Matrix h = model.stack_jacobian(x);
  const Vector inv_sigma = model.sigmas().cwiseInverse();
  const Matrix whitened = inv_sigma.asDiagonal() * h;

  FisherInfo info;
  const Matrix raw = whitened.transpose() * whitened;
  info.matrix = 0.5 * (raw + raw.transpose());
  const auto dim = info.matrix.rows();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(info.matrix);
  const Vector& lambda = eig.eigenvalues();  // ascending
  const double lambda_max = dim > 0 ? std::max(lambda(dim - 1), 0.0) : 0.0;
  info.rank = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (lambda(i) > kRankThreshold * lambda_max) ++info.rank;
  }
  if (dim > 0 && info.rank == dim && lambda(0) > 0.0) {
    info.log_det = lambda.array().log().sum();
  } else {
    // The null basis comes from the whitened Jacobian itself: its singular
    // vectors resolve H v to machine precision, eigenvectors of H^T H do not.
    Eigen::JacobiSVD<Matrix> svd(whitened, Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double s_max = s.size() ? s(0) : 0.0;
    int nonzero = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) * s(i) > kRankThreshold * s_max * s_max) ++nonzero;
    }
    nonzero = std::min<int>(nonzero, static_cast<int>(dim) - 1);
    info.null_space = svd.matrixV().rightCols(dim - nonzero);
  }
  return info;
}

FisherInfo fim(const StateTuple& x, const Scenario& scenario) { return fim(x, MeasurementModel(scenario)); }

Cost j_est(const FisherInfo& info) {
  if (!info.log_det) return Cost::infinite();
  return Cost(-*info.log_det);
}

Cost j_est(const StateTuple& x, const MeasurementModel& model) { return j_est(fim(x, model)); }
Cost j_est(const StateTuple& x, const Scenario& scenario) { return j_est(fim(x, scenario)); }

Vector null_direction(const FisherInfo& info) {
  if (info.full_rank() || info.null_space.cols() == 0) {
    throw InvalidArgument("null_direction: information matrix is full rank");
  }
  return info.null_space.col(0);
}

Matrix fim_inverse(const FisherInfo& info) {
  if (!info.full_rank()) {
    const Vector v = null_direction(info);
    std::ostringstream msg;
    msg << "Fisher information is rank-deficient (rank " << info.rank << " of " << info.matrix.rows()
        << "); null direction [" << v.transpose().format(Eigen::IOFormat(6, Eigen::DontAlignCols, ", ")) << "]";
    throw ObservabilityError(v, msg.str());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(info.matrix);
  const Matrix& v = eig.eigenvectors();
  Matrix inv = v * eig.eigenvalues().cwiseInverse().asDiagonal() * v.transpose();
  return 0.5 * (inv + inv.transpose());
}

double CrlbEllipse::eccentricity() const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
  const Vector& l = eig.eigenvalues();
  return std::sqrt(l(l.size() - 1) / l(0));
}

double CrlbEllipse::area() const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
  const Vector& l = eig.eigenvalues();
  const auto n = l.size();
  return std::numbers::pi * std::sqrt(l(n - 1)) * std::sqrt(l(n - 2));
}

std::vector<CrlbEllipse> crlb(const StateTuple& x, const MeasurementModel& model) {
  const FisherInfo info = fim(x, model);
  const Matrix inv = fim_inverse(info);
  const GroupMode mode = x.mode();
  const int m = tangent_dim(mode), n = space_dim(mode), rd = rotation_dof(mode);

  std::vector<CrlbEllipse> out;
  for (int agent = 2; agent <= x.agent_count(); ++agent) {
    const Pose& pose = x.pose(agent);
    const Matrix tangent_cov = inv.block((agent - 2) * m + rd, (agent - 2) * m + rd, n, n);
    // Right perturbation moves the position by C * du.
    Matrix cov = pose.rotation() * tangent_cov * pose.rotation().transpose();
    cov = 0.5 * (cov + cov.transpose());

    CrlbEllipse e;
    e.agent_id = agent;
    e.center = pose.translation();
    e.covariance = cov;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const Vector& l = eig.eigenvalues();
    const Matrix& axes = eig.eigenvectors();
    const Vector major = axes.col(n - 1) * std::sqrt(l(n - 1));
    const Vector minor = axes.col(n - 2) * std::sqrt(l(n - 2));
    for (int k = 0; k < kContourPoints; ++k) {
      const double t = 2.0 * std::numbers::pi * k / kContourPoints;
      e.contour.push_back(e.center + std::cos(t) * major + std::sin(t) * minor);
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<CrlbEllipse> crlb(const StateTuple& x, const Scenario& scenario) {
  return crlb(x, MeasurementModel(scenario));
}

}  // namespace formation
