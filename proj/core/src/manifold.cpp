#include "formation/manifold.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "formation/errors.hpp"

namespace formation {

namespace {

void require_length(const Vector& v, Eigen::Index expected, const char* what) {
  if (v.size() != expected) {
    throw InvalidArgument(std::string(what) + ": expected length " + std::to_string(expected) +
                          ", got " + std::to_string(v.size()));
  }
}

Eigen::Vector3d rotation_vector(GroupMode mode, const Vector& xi) {
  if (mode == GroupMode::SE3) return xi.head<3>();
  return Eigen::Vector3d(0.0, 0.0, xi(0));
}

// Translation is always the trailing three coordinates in 3D modes.
Eigen::Vector3d translation_vector(const Vector& xi) { return xi.tail<3>(); }

Eigen::Matrix2d planar_rotation(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

// 1 - cos(theta) without cancellation near zero.
double versine(double theta) {
  const double h = std::sin(theta / 2.0);
  return 2.0 * h * h;
}

// Left Jacobian of SO(2) acting on translation: (1/theta)[[s, -(1-c)], [1-c, s]].
Eigen::Matrix2d planar_left_jacobian(double theta) {
  Eigen::Matrix2d v;
  if (std::abs(theta) < kSmallAngle) {
    const double a = 1.0 - theta * theta / 6.0, b = theta / 2.0;
    v << a, -b, b, a;
    return v;
  }
  const double s = std::sin(theta), vers = versine(theta);
  v << s / theta, -vers / theta, vers / theta, s / theta;
  return v;
}

Eigen::Matrix2d planar_left_jacobian_inverse(double theta) {
  Eigen::Matrix2d v;
  const double half = theta / 2.0;
  double a;
  if (std::abs(theta) < kSmallAngle) {
    a = 1.0 - theta * theta / 12.0;
  } else {
    a = half / std::tan(half);
  }
  v << a, half, -half, a;
  return v;
}

struct So3Exp {
  Eigen::Matrix3d rotation;
  Eigen::Matrix3d left_jacobian;
};

So3Exp so3_exp(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  const Eigen::Matrix3d k2 = k * k;
  const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
  if (theta < kSmallAngle) {
    return {eye + k + 0.5 * k2, eye + 0.5 * k + k2 / 6.0};
  }
  const double s = std::sin(theta), vers = versine(theta);
  const double t2 = theta * theta;
  return {eye + (s / theta) * k + (vers / t2) * k2,
          eye + (vers / t2) * k + ((theta - s) / (t2 * theta)) * k2};
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d w(0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)),
                          0.5 * (r(1, 0) - r(0, 1)));
  const double s = w.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (theta >= std::numbers::pi - kBranchMargin) {
    throw DomainError("log: rotation angle " + std::to_string(theta) + " at the branch cut");
  }
  if (theta < kSmallAngle) return w * (1.0 + theta * theta / 6.0);
  return w * (theta / s);
}

Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  double coeff;
  if (theta < kSmallAngle) {
    coeff = 1.0 / 12.0;
  } else {
    const double half = theta / 2.0;
    coeff = (1.0 - half / std::tan(half)) / (theta * theta);
  }
  return Eigen::Matrix3d::Identity() - 0.5 * k + coeff * k * k;
}

double planar_angle(const Matrix& r) { return std::atan2(r(1, 0), r(0, 0)); }

void check_branch(double theta) {
  if (std::abs(theta) >= std::numbers::pi - kBranchMargin) {
    throw DomainError("log: rotation angle " + std::to_string(theta) + " at the branch cut");
  }
}

void require_heading_only(const Matrix& r) {
  if (std::abs(r(2, 0)) > kGroupTolerance || std::abs(r(2, 1)) > kGroupTolerance ||
      std::abs(r(0, 2)) > kGroupTolerance || std::abs(r(1, 2)) > kGroupTolerance ||
      std::abs(r(2, 2) - 1.0) > kGroupTolerance) {
    throw InvalidArgument("heading mode: rotation has nonzero roll or pitch");
  }
}

}  // namespace

int space_dim(GroupMode mode) { return mode == GroupMode::SE2 ? 2 : 3; }

int tangent_dim(GroupMode mode) {
  switch (mode) {
    case GroupMode::SE2: return 3;
    case GroupMode::SE3: return 6;
    case GroupMode::SE3Heading: return 4;
  }
  return 0;
}

int rotation_dof(GroupMode mode) { return mode == GroupMode::SE3 ? 3 : 1; }

std::string to_string(GroupMode mode) {
  switch (mode) {
    case GroupMode::SE2: return "SE2";
    case GroupMode::SE3: return "SE3";
    case GroupMode::SE3Heading: return "SE3-heading";
  }
  return "?";
}

GroupMode parse_group_mode(std::string_view text) {
  if (text == "SE2") return GroupMode::SE2;
  if (text == "SE3") return GroupMode::SE3;
  if (text == "SE3-heading") return GroupMode::SE3Heading;
  throw InvalidArgument("unknown group mode '" + std::string(text) +
                        "' (expected SE2, SE3 or SE3-heading)");
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v(2), v(1), v(2), 0.0, -v(0), -v(1), v(0), 0.0;
  return s;
}

Vector homogeneous_point(const Vector& body_point) {
  Vector p(body_point.size() + 1);
  p << body_point, 1.0;
  return p;
}

// ---------------------------------------------------------------------------
// Pose

Pose::Pose(Matrix rotation, Vector translation, Unchecked)
    : rotation_(std::move(rotation)), translation_(std::move(translation)) {}

Pose::Pose(Matrix rotation, Vector translation)
    : rotation_(std::move(rotation)), translation_(std::move(translation)) {
  const auto n = translation_.size();
  if (n != 2 && n != 3) throw InvalidArgument("Pose: translation must have 2 or 3 entries");
  if (rotation_.rows() != n || rotation_.cols() != n) {
    throw InvalidArgument("Pose: rotation must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (!rotation_.allFinite() || !translation_.allFinite()) {
    throw InvalidArgument("Pose: non-finite entries");
  }
  const double ortho = (rotation_.transpose() * rotation_ - Matrix::Identity(n, n)).norm();
  if (ortho > kGroupTolerance) {
    throw InvalidArgument("Pose: rotation is not orthonormal (|R^T R - I| = " +
                          std::to_string(ortho) + ")");
  }
  if (std::abs(rotation_.determinant() - 1.0) > kGroupTolerance) {
    throw InvalidArgument("Pose: rotation determinant is not +1");
  }
}

Pose Pose::identity(int n) { return Pose(Matrix::Identity(n, n), Vector::Zero(n), Unchecked{}); }

Matrix Pose::homogeneous() const {
  const auto n = dim();
  Matrix t = Matrix::Identity(n + 1, n + 1);
  t.topLeftCorner(n, n) = rotation_;
  t.topRightCorner(n, 1) = translation_;
  return t;
}

Pose Pose::inverse() const {
  Matrix rt = rotation_.transpose();
  Vector t = -rt * translation_;
  return Pose(std::move(rt), std::move(t), Unchecked{});
}

Pose Pose::operator*(const Pose& rhs) const {
  if (rhs.dim() != dim()) throw InvalidArgument("Pose: dimension mismatch in composition");
  return Pose(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_, Unchecked{});
}

Vector Pose::transform_point(const Vector& body_point) const {
  require_length(body_point, dim(), "Pose::transform_point");
  return rotation_ * body_point + translation_;
}

// ---------------------------------------------------------------------------
// StateTuple

StateTuple::StateTuple(GroupMode mode, std::vector<Pose> poses)
    : mode_(mode), poses_(std::move(poses)), identity_(Pose::identity(space_dim(mode))) {
  const int n = space_dim(mode);
  for (const auto& p : poses_) {
    if (p.dim() != n) {
      throw InvalidArgument("StateTuple: pose dimension " + std::to_string(p.dim()) +
                            " does not match mode " + to_string(mode));
    }
    if (mode == GroupMode::SE3Heading) require_heading_only(p.rotation());
  }
}

const Pose& StateTuple::pose(int agent_id) const {
  if (agent_id == 1) return identity_;
  if (agent_id < 2 || agent_id > agent_count()) {
    throw NotFound("StateTuple: no agent " + std::to_string(agent_id));
  }
  return poses_[static_cast<std::size_t>(agent_id - 2)];
}

// ---------------------------------------------------------------------------
// Algebra

Matrix wedge(GroupMode mode, const Vector& xi) {
  require_length(xi, tangent_dim(mode), "wedge");
  if (mode == GroupMode::SE2) {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = -xi(0);
    a(1, 0) = xi(0);
    a(0, 2) = xi(1);
    a(1, 2) = xi(2);
    return a;
  }
  Matrix a = Matrix::Zero(4, 4);
  a.topLeftCorner<3, 3>() = skew(rotation_vector(mode, xi));
  a.topRightCorner<3, 1>() = translation_vector(xi);
  return a;
}

Vector vee(GroupMode mode, const Matrix& algebra) {
  const int n = space_dim(mode);
  if (algebra.rows() != n + 1 || algebra.cols() != n + 1) {
    throw InvalidArgument("vee: expected a " + std::to_string(n + 1) + "x" +
                          std::to_string(n + 1) + " matrix");
  }
  const Matrix block = algebra.topLeftCorner(n, n);
  const double sym = (0.5 * (block + block.transpose())).cwiseAbs().maxCoeff();
  const double last_row = algebra.row(n).cwiseAbs().maxCoeff();
  if (sym > kGroupTolerance || last_row > kGroupTolerance) {
    throw InvalidArgument("vee: matrix is not in the Lie algebra");
  }
  if (mode == GroupMode::SE2) {
    return Eigen::Vector3d(0.5 * (algebra(1, 0) - algebra(0, 1)), algebra(0, 2), algebra(1, 2));
  }
  const Eigen::Vector3d phi(0.5 * (algebra(2, 1) - algebra(1, 2)),
                            0.5 * (algebra(0, 2) - algebra(2, 0)),
                            0.5 * (algebra(1, 0) - algebra(0, 1)));
  const Eigen::Vector3d rho = algebra.topRightCorner<3, 1>();
  Vector xi(tangent_dim(mode));
  if (mode == GroupMode::SE3) {
    xi << phi, rho;
  } else {
    if (std::abs(phi(0)) > kGroupTolerance || std::abs(phi(1)) > kGroupTolerance) {
      throw InvalidArgument("vee: heading-mode algebra has roll/pitch components");
    }
    xi << phi(2), rho;
  }
  return xi;
}

Pose exp_map(GroupMode mode, const Vector& xi) {
  require_length(xi, tangent_dim(mode), "exp");
  if (!xi.allFinite()) throw InvalidArgument("exp: non-finite tangent");
  if (mode == GroupMode::SE2) {
    const double theta = xi(0);
    const Eigen::Vector2d u = xi.tail<2>();
    return Pose(planar_rotation(theta), planar_left_jacobian(theta) * u, Pose::Unchecked{});
  }
  const So3Exp e = so3_exp(rotation_vector(mode, xi));
  return Pose(e.rotation, e.left_jacobian * translation_vector(xi), Pose::Unchecked{});
}

Vector log_map(GroupMode mode, const Pose& pose) {
  if (pose.dim() != space_dim(mode)) throw InvalidArgument("log: pose dimension mismatch");
  const Matrix& r = pose.rotation();
  if (mode == GroupMode::SE2) {
    const double theta = planar_angle(r);
    check_branch(theta);
    Vector xi(3);
    xi << theta, planar_left_jacobian_inverse(theta) * pose.translation();
    return xi;
  }
  if (mode == GroupMode::SE3Heading) {
    require_heading_only(r);
    const double theta = planar_angle(r);
    check_branch(theta);
    Vector xi(4);
    xi << theta, planar_left_jacobian_inverse(theta) * pose.translation().head<2>(),
        pose.translation()(2);
    return xi;
  }
  const Eigen::Vector3d phi = so3_log(r);
  Vector xi(6);
  xi << phi, so3_left_jacobian_inverse(phi) * pose.translation();
  return xi;
}

Matrix odot(GroupMode mode, const Vector& p) {
  const int n = space_dim(mode);
  require_length(p, n + 1, "odot");
  if (p(n) != 1.0) throw InvalidArgument("odot: homogeneous point must end in exactly 1");
  Matrix out = Matrix::Zero(n + 1, tangent_dim(mode));
  const int rd = rotation_dof(mode);
  if (mode == GroupMode::SE3) {
    out.topLeftCorner<3, 3>() = -skew(p.head<3>());
  } else {
    out(0, 0) = -p(1);
    out(1, 0) = p(0);
  }
  out.block(0, rd, n, n) = Matrix::Identity(n, n);
  return out;
}

Matrix project_rotation(GroupMode mode, const Matrix& rotation) {
  if (mode == GroupMode::SE3) {
    Eigen::JacobiSVD<Matrix> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix u = svd.matrixU();
    const Matrix& v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
    return u * v.transpose();
  }
  // Polar factor of a near-rotation 2x2 block [[a, -b], [b, a]] + noise.
  const double a = 0.5 * (rotation(0, 0) + rotation(1, 1));
  const double b = 0.5 * (rotation(1, 0) - rotation(0, 1));
  const double norm = std::hypot(a, b);
  Matrix out = rotation;
  out(0, 0) = a / norm;
  out(1, 1) = a / norm;
  out(1, 0) = b / norm;
  out(0, 1) = -b / norm;
  return out;
}

Pose retract(GroupMode mode, const Pose& pose, const Vector& xi) {
  if (xi.size() == tangent_dim(mode) && xi.isZero(0.0)) return pose;
  Pose moved = pose * exp_map(mode, xi);
  moved.rotation_ = project_rotation(mode, moved.rotation_);
  return moved;
}

StateTuple oplus(const StateTuple& x, const Vector& dx) {
  const int m = tangent_dim(x.mode());
  require_length(dx, x.tangent_size(), "oplus");
  std::vector<Pose> poses;
  poses.reserve(x.poses().size());
  for (std::size_t i = 0; i < x.poses().size(); ++i) {
    poses.push_back(retract(x.mode(), x.poses()[i], dx.segment(static_cast<Eigen::Index>(i) * m, m)));
  }
  return StateTuple(x.mode(), std::move(poses));
}

Matrix rotation_exp(GroupMode mode, const Vector& phi) {
  require_length(phi, rotation_dof(mode), "rotation_exp");
  if (mode == GroupMode::SE2) return planar_rotation(phi(0));
  return so3_exp(mode == GroupMode::SE3 ? Eigen::Vector3d(phi) : Eigen::Vector3d(0, 0, phi(0)))
      .rotation;
}

Vector rotation_log(GroupMode mode, const Matrix& rotation) {
  const int n = space_dim(mode);
  if (rotation.rows() != n || rotation.cols() != n) {
    throw InvalidArgument("rotation_log: shape mismatch");
  }
  if (mode == GroupMode::SE3) return so3_log(rotation);
  if (mode == GroupMode::SE3Heading) require_heading_only(rotation);
  const double theta = planar_angle(rotation);
  check_branch(theta);
  return Vector::Constant(1, theta);
}

Matrix rotation_right_jacobian_inverse(GroupMode mode, const Vector& phi) {
  require_length(phi, rotation_dof(mode), "rotation_right_jacobian_inverse");
  if (mode != GroupMode::SE3) return Matrix::Identity(1, 1);
  // J_r^{-1}(phi) = J_l^{-1}(-phi).
  return so3_left_jacobian_inverse(-Eigen::Vector3d(phi));
}

}  // namespace formation
