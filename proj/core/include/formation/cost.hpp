#pragma once

#include <compare>
#include <string>

namespace formation {

/// A real cost value extended with a saturated +infinity marker.
///
/// Unobservable formations have no finite estimation cost. Rather than
/// letting IEEE infinities or NaNs leak through arithmetic, the marker is an
/// explicit state: it orders above every finite value and absorbs addition.
class Cost {
 public:
  constexpr Cost() = default;
  explicit Cost(double value);

  static constexpr Cost infinite() {
    Cost c;
    c.infinite_ = true;
    return c;
  }

  constexpr bool is_finite() const noexcept { return !infinite_; }
  constexpr bool is_infinite() const noexcept { return infinite_; }

  /// Throws InvalidArgument on the infinite marker.
  double value() const;

  /// Finite value or `fallback` for the marker.
  constexpr double value_or(double fallback) const noexcept {
    return infinite_ ? fallback : value_;
  }

  Cost operator+(const Cost& other) const;
  Cost operator+(double other) const;

  std::partial_ordering operator<=>(const Cost& other) const noexcept;
  bool operator==(const Cost& other) const noexcept;

  /// "inf" for the marker, otherwise 17 significant digits.
  std::string to_string() const;

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

}  // namespace formation
