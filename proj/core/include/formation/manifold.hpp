#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace formation {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Which pose group the state lives on.
///
/// `SE3Heading` is SE(3) restricted to yaw plus 3D translation: roll and pitch
/// are identically zero, the tangent is (theta_z, u_x, u_y, u_z).
enum class GroupMode { SE2, SE3, SE3Heading };

/// Spatial dimension n (2 or 3).
int space_dim(GroupMode mode);
/// Tangent dimension m: 3, 6 or 4.
int tangent_dim(GroupMode mode);
/// Number of rotational tangent coordinates (they come first).
int rotation_dof(GroupMode mode);

std::string to_string(GroupMode mode);
GroupMode parse_group_mode(std::string_view text);

/// Below this rotation angle, closed forms switch to Taylor expansions.
inline constexpr double kSmallAngle = 1e-7;
/// log() refuses rotations with |theta| >= pi - kBranchMargin.
inline constexpr double kBranchMargin = 1e-6;
/// Orthonormality and algebra-membership tolerance.
inline constexpr double kGroupTolerance = 1e-9;

/// Rigid transform [[C, r], [0, 1]] in SE(n).
class Pose {
 public:
  /// Checks shapes and that `rotation` is a proper rotation within
  /// kGroupTolerance; throws InvalidArgument otherwise.
  Pose(Matrix rotation, Vector translation);

  static Pose identity(int n);

  int dim() const { return static_cast<int>(translation_.size()); }
  const Matrix& rotation() const { return rotation_; }
  const Vector& translation() const { return translation_; }

  Matrix homogeneous() const;
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;

  /// Maps a body-frame point (n-vector) into the parent frame.
  Vector transform_point(const Vector& body_point) const;

 private:
  struct Unchecked {};
  Pose(Matrix rotation, Vector translation, Unchecked);

  Matrix rotation_;
  Vector translation_;

  friend Pose exp_map(GroupMode, const Vector&);
  friend Pose retract(GroupMode, const Pose&, const Vector&);
};

/// The state (T_12, ..., T_1N). Agent 1 is the reference and is never stored.
class StateTuple {
 public:
  StateTuple(GroupMode mode, std::vector<Pose> poses);

  GroupMode mode() const { return mode_; }
  int agent_count() const { return static_cast<int>(poses_.size()) + 1; }
  int tangent_size() const { return tangent_dim(mode_) * static_cast<int>(poses_.size()); }

  /// Pose of `agent_id` relative to agent 1; identity for agent 1 itself.
  const Pose& pose(int agent_id) const;
  const std::vector<Pose>& poses() const { return poses_; }

  /// Reference-point position of `agent_id` in agent 1's frame.
  Vector position(int agent_id) const { return pose(agent_id).translation(); }

 private:
  GroupMode mode_;
  std::vector<Pose> poses_;
  Pose identity_;
};

Matrix wedge(GroupMode mode, const Vector& xi);
Vector vee(GroupMode mode, const Matrix& algebra);

Pose exp_map(GroupMode mode, const Vector& xi);
Vector log_map(GroupMode mode, const Pose& pose);

/// (n+1) x m matrix with wedge(xi) * p == odot(p) * xi for homogeneous p.
Matrix odot(GroupMode mode, const Vector& homogeneous_point);

/// pose * exp(xi^) followed by rotation re-orthonormalization.
Pose retract(GroupMode mode, const Pose& pose, const Vector& xi);

/// Elementwise right retraction of the whole tuple; dx stacks one m-block per
/// agent 2..N.
StateTuple oplus(const StateTuple& x, const Vector& dx);

/// Nearest rotation (polar factor). Heading mode only touches the yaw block.
Matrix project_rotation(GroupMode mode, const Matrix& rotation);

/// Rotation-only exp/log on the rotational tangent coordinates.
Matrix rotation_exp(GroupMode mode, const Vector& phi);
Vector rotation_log(GroupMode mode, const Matrix& rotation);

/// Inverse right Jacobian of the rotation group:
/// log(exp(phi) exp(dphi)) ~= phi + J_r^{-1}(phi) dphi.
Matrix rotation_right_jacobian_inverse(GroupMode mode, const Vector& phi);

/// Appends the homogeneous 1.
Vector homogeneous_point(const Vector& body_point);

/// 3x3 cross-product matrix.
Eigen::Matrix3d skew(const Eigen::Vector3d& v);

}  // namespace formation
