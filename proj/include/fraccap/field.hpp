#pragma once

#include <cmath>
#include <vector>

#include "fraccap/space.hpp"

namespace fraccap {

/// A real value per point. Plain value type; callers keep it aligned with
/// the space it was built for.
using ScalarField = std::vector<double>;

/// Mass-weighted average over a nonempty set: sum u*mu / mu(A).
inline double set_average(const MetricMeasureSpace& space, const ScalarField& u,
                          const PointSet& a) {
  if (a.empty()) throw invalid_argument_error("set_average: empty set");
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < space.n(); ++i)
    if (a.contains(i)) {
      num += u[static_cast<std::size_t>(i)] * space.weight(i);
      den += space.weight(i);
    }
  return num / den;
}

/// ( avg_A |u|^t )^{1/t}.
inline double set_lt_average(const MetricMeasureSpace& space, const ScalarField& u,
                             const PointSet& a, double t) {
  if (a.empty()) throw invalid_argument_error("set_lt_average: empty set");
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < space.n(); ++i)
    if (a.contains(i)) {
      num += std::pow(std::abs(u[static_cast<std::size_t>(i)]), t) * space.weight(i);
      den += space.weight(i);
    }
  return std::pow(num / den, 1.0 / t);
}

inline ScalarField constant_field(const MetricMeasureSpace& space, double c) {
  return ScalarField(static_cast<std::size_t>(space.n()), c);
}

inline ScalarField clamp_field(const ScalarField& u, double lo, double hi) {
  ScalarField v = u;
  for (double& x : v) x = std::min(hi, std::max(lo, x));
  return v;
}

inline double field_osc(const ScalarField& u) {
  double lo = u[0], hi = u[0];
  for (double x : u) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return hi - lo;
}

}  // namespace fraccap
