#pragma once

// Scalar special functions shared by the copula families and the
// regression models.

#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace rctsynth {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

// Numerically safe logistic function; the linear predictor is clamped so
// probabilities stay strictly inside (0,1) in double precision.
inline double logistic(double eta) {
  constexpr double clamp = 36.0;
  if (eta > clamp) eta = clamp;
  if (eta < -clamp) eta = -clamp;
  return 1.0 / (1.0 + std::exp(-eta));
}

// First-order Debye function D1(x) = (1/x) * int_0^x t / (e^t - 1) dt, x > 0.
inline double debye1(double x) {
  if (x == 0.0) return 1.0;
  const double ax = std::fabs(x);
  auto integrand = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
  double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, ax, 10, 1e-14);
  value /= ax;
  // D1(-x) = D1(x) + x/2
  return x > 0.0 ? value : value + ax / 2.0;
}

}  // namespace rctsynth
