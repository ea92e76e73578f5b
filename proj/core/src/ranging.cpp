#include "formation/ranging.hpp"

#include "formation/errors.hpp"

namespace formation {

MeasurementModel::MeasurementModel(const Scenario& scenario)
    : mode_(scenario.mode), agent_count_(scenario.agent_count) {
  edges_.reserve(scenario.graph.size());
  for (const Edge& e : scenario.graph.edges()) {
    const TagLayout& ti = scenario.tag(e.tag_i);
    const TagLayout& tj = scenario.tag(e.tag_j);
    edges_.push_back({e.tag_i, e.tag_j, ti.agent_id, tj.agent_id, homogeneous_point(ti.body_position),
                      homogeneous_point(tj.body_position), e.sigma});
  }
}

Vector MeasurementModel::sigmas() const {
  Vector s(static_cast<Eigen::Index>(edges_.size()));
  for (std::size_t k = 0; k < edges_.size(); ++k) s(static_cast<Eigen::Index>(k)) = edges_[k].sigma;
  return s;
}

void MeasurementModel::check_state(const StateTuple& x) const {
  if (x.mode() != mode_ || x.agent_count() != agent_count_) {
    throw InvalidArgument("state does not match the measurement model (mode " + to_string(x.mode()) +
                          ", " + std::to_string(x.agent_count()) + " agents)");
  }
}

Vector MeasurementModel::tag_position(const StateTuple& x, int agent_id, const Vector& p) const {
  const Pose& t = x.pose(agent_id);
  return t.rotation() * p.head(p.size() - 1) + t.translation();
}

double MeasurementModel::range(const StateTuple& x, std::size_t k) const {
  check_state(x);
  const ResolvedEdge& e = edges_.at(k);
  return (tag_position(x, e.agent_alpha, e.p_i) - tag_position(x, e.agent_beta, e.p_j)).norm();
}

Vector MeasurementModel::ranges(const StateTuple& x) const {
  Vector y(static_cast<Eigen::Index>(edges_.size()));
  for (std::size_t k = 0; k < edges_.size(); ++k) y(static_cast<Eigen::Index>(k)) = range(x, k);
  return y;
}

JacobianBlocks MeasurementModel::jacobian_blocks(const StateTuple& x, std::size_t k) const {
  check_state(x);
  const ResolvedEdge& e = edges_.at(k);
  const Vector diff = tag_position(x, e.agent_alpha, e.p_i) - tag_position(x, e.agent_beta, e.p_j);
  const double y = diff.norm();
  if (y < kMinRange) {
    throw SingularGeometry(k, e.tag_i, e.tag_j,
                           "edge " + std::to_string(k) + " (tags " + std::to_string(e.tag_i) + ", " +
                               std::to_string(e.tag_j) + "): tags coincide, range direction undefined");
  }
  const int n = space_dim(mode_);
  JacobianBlocks out;
  out.direction = diff / y;
  const RowVector rho = out.direction.transpose();
  // D T p^odot = C * (top n rows of p^odot); the last row of p^odot is zero.
  out.alpha = rho * x.pose(e.agent_alpha).rotation() * odot(mode_, e.p_i).topRows(n);
  out.beta = -rho * x.pose(e.agent_beta).rotation() * odot(mode_, e.p_j).topRows(n);
  return out;
}

Matrix MeasurementModel::stack_jacobian(const StateTuple& x) const {
  check_state(x);
  const int m = tangent_dim(mode_);
  Matrix h = Matrix::Zero(static_cast<Eigen::Index>(edges_.size()), x.tangent_size());
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const ResolvedEdge& e = edges_[k];
    const JacobianBlocks blocks = jacobian_blocks(x, k);
    const auto row = static_cast<Eigen::Index>(k);
    if (e.agent_alpha != 1) h.block(row, (e.agent_alpha - 2) * m, 1, m) = blocks.alpha;
    if (e.agent_beta != 1) h.block(row, (e.agent_beta - 2) * m, 1, m) = blocks.beta;
  }
  return h;
}

MeasurementVector MeasurementModel::synthesize(const StateTuple& x, std::mt19937_64& rng) const {
  MeasurementVector out{ranges(x), sigmas()};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index k = 0; k < out.values.size(); ++k) out.values(k) += out.sigmas(k) * normal(rng);
  return out;
}

Matrix finite_difference_jacobian(const MeasurementModel& model, const StateTuple& x, double h) {
  const Eigen::Index dim = x.tangent_size();
  Matrix jac(static_cast<Eigen::Index>(model.edge_count()), dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    Vector dx = Vector::Zero(dim);
    dx(c) = h;
    const Vector plus = model.ranges(oplus(x, dx));
    const Vector minus = model.ranges(oplus(x, -dx));
    jac.col(c) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

double jacobian_relative_error(const Matrix& analytic, const Matrix& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw InvalidArgument("jacobian_relative_error: shape mismatch");
  }
  const double scale = numeric.cwiseAbs().maxCoeff();
  const double diff = (analytic - numeric).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace formation
