#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nogap {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Tolerances shared across modules. All are relative to max(1, scale).
namespace tol {
inline constexpr double kAnnihilator = 1e-9;
inline constexpr double kMartingale = 1e-9;
inline constexpr double kCoalesce = 1e-12;
inline constexpr double kPivot = 1e-11;
inline constexpr double kFeasibility = 1e-9;
}  // namespace tol

inline bool is_finite(double v) { return std::isfinite(v); }

inline double scaled(double tolerance, double scale) {
  return tolerance * std::max(1.0, std::abs(scale));
}

inline bool near(double a, double b, double tolerance) {
  if (a == b) return true;
  if (!is_finite(a) || !is_finite(b)) return false;
  return std::abs(a - b) <= tolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Sum of extended reals with the convention that +inf absorbs everything.
inline double ext_add(double a, double b) {
  if (a == kInf || b == kInf) return kInf;
  return a + b;
}

/// Thrown when an input violates an operation's precondition.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace nogap
