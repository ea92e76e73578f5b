#include "formation/cost.hpp"

#include <cmath>

#include "formation/csv.hpp"
#include "formation/errors.hpp"

namespace formation {

Cost::Cost(double value) : value_(value) {
  if (std::isnan(value)) throw InvalidArgument("Cost: NaN is not a cost");
  if (std::isinf(value)) {
    if (value < 0) throw InvalidArgument("Cost: -inf is not a cost");
    infinite_ = true;
    value_ = 0.0;
  }
}

double Cost::value() const {
  if (infinite_) throw InvalidArgument("Cost: value() on infinite marker");
  return value_;
}

Cost Cost::operator+(const Cost& other) const {
  if (infinite_ || other.infinite_) return infinite();
  return Cost(value_ + other.value_);
}

Cost Cost::operator+(double other) const { return *this + Cost(other); }

std::partial_ordering Cost::operator<=>(const Cost& other) const noexcept {
  if (infinite_ && other.infinite_) return std::partial_ordering::equivalent;
  if (infinite_) return std::partial_ordering::greater;
  if (other.infinite_) return std::partial_ordering::less;
  return value_ <=> other.value_;
}

bool Cost::operator==(const Cost& other) const noexcept {
  return (*this <=> other) == std::partial_ordering::equivalent;
}

std::string Cost::to_string() const { return infinite_ ? "inf" : format_double(value_); }

}  // namespace formation
