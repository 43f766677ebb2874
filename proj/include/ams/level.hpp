#pragma once

#include <cmath>
#include <compare>
#include <limits>
#include <stdexcept>

namespace ams {

/// A level on the extended real line. -inf marks "before the first level",
/// +inf marks extinction or an exhausted stopping rule. NaN is rejected.
class ExtendedLevel {
 public:
  constexpr ExtendedLevel() noexcept = default;

  explicit ExtendedLevel(double value) : value_(value) {
    if (std::isnan(value)) throw std::invalid_argument("ExtendedLevel: NaN level");
  }

  static constexpr ExtendedLevel minus_infinity() noexcept {
    return ExtendedLevel(Raw{}, -std::numeric_limits<double>::infinity());
  }
  static constexpr ExtendedLevel plus_infinity() noexcept {
    return ExtendedLevel(Raw{}, std::numeric_limits<double>::infinity());
  }

  constexpr double value() const noexcept { return value_; }
  bool is_finite() const noexcept { return std::isfinite(value_); }
  constexpr bool is_plus_infinity() const noexcept {
    return value_ == std::numeric_limits<double>::infinity();
  }

  // Ties are exact: two levels are equal only when their doubles are identical.
  constexpr bool operator==(const ExtendedLevel&) const noexcept = default;
  constexpr std::partial_ordering operator<=>(const ExtendedLevel& other) const noexcept {
    return value_ <=> other.value_;
  }

 private:
  struct Raw {};
  constexpr ExtendedLevel(Raw, double value) noexcept : value_(value) {}

  double value_ = -std::numeric_limits<double>::infinity();
};

}  // namespace ams
