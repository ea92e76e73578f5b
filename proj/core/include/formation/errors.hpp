#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace formation {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Logarithm requested at or beyond the rotation branch cut.
class DomainError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

/// Scenario document failed schema or invariant checks. `field()` names the
/// offending key path, e.g. "graph.sigma".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Two measured tags coincide, so the range direction is undefined.
class SingularGeometry : public Error {
 public:
  SingularGeometry(std::size_t edge_index, int tag_i, int tag_j, const std::string& what)
      : Error(what), edge_index_(edge_index), tag_i_(tag_i), tag_j_(tag_j) {}
  std::size_t edge_index() const noexcept { return edge_index_; }
  int tag_i() const noexcept { return tag_i_; }
  int tag_j() const noexcept { return tag_j_; }

 private:
  std::size_t edge_index_;
  int tag_i_;
  int tag_j_;
};

/// Rank-deficient Fisher information. Carries one unit null-space direction
/// in the stacked tangent coordinates.
class ObservabilityError : public Error {
 public:
  ObservabilityError(Eigen::VectorXd null_direction, const std::string& what)
      : Error(what), null_direction_(std::move(null_direction)) {}
  const Eigen::VectorXd& null_direction() const noexcept { return null_direction_; }

 private:
  Eigen::VectorXd null_direction_;
};

/// Inter-agent distance sits on the collision barrier pole.
class BarrierPole : public Error {
 public:
  using Error::Error;
};

/// Inter-agent distance is inside the safety radius.
class InfeasibleState : public Error {
 public:
  using Error::Error;
};

class GradientError : public Error {
 public:
  using Error::Error;
};

class EstimatorSingular : public Error {
 public:
  using Error::Error;
};

}  // namespace formation
