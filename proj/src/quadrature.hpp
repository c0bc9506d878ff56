#pragma once

#include <cmath>
#include <functional>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "trigs/errors.hpp"

namespace trigs::detail {

// Adaptive 15-point Gauss–Kronrod over [a, b], split into log-spaced panels
// when the interval spans decades. Throws on a non-finite integrand.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-12) {
  if (b <= a) return 0.0;
  auto guarded = [&f](double s) {
    const double v = f(s);
    if (!std::isfinite(v)) throw Error("quadrature: non-finite integrand at s = " + std::to_string(s));
    return v;
  };
  int panels = 1;
  if (a > 0.0) panels = std::max(1, static_cast<int>(std::ceil(4.0 * std::log10(b / a))));
  double total = 0.0;
  double lo = a;
  for (int i = 1; i <= panels; ++i) {
    const double hi = (i == panels) ? b : a * std::pow(b / a, static_cast<double>(i) / panels);
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(guarded, lo, hi, 15,
                                                                          rel_tol);
    lo = hi;
  }
  return total;
}

}  // namespace trigs::detail
