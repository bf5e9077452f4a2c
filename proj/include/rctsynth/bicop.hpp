#pragma once

// One-parameter bivariate copula families (with rotations), their
// h-functions and inverses, Kendall's tau <-> parameter maps and the
// tau-inversion + likelihood refinement fit used on every vine edge.
//
// Conventions: C(u, v) with u the first and v the second argument.
//   hfunc2(u, v) = dC/dv = P(U <= u | V = v)
//   hfunc1(u, v) = dC/du = P(V <= v | U = u)
// hinv2 inverts hfunc2 in u, hinv1 inverts hfunc1 in v.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "rctsynth/error.hpp"
#include "rctsynth/special.hpp"
#include "rctsynth/stats.hpp"

namespace rctsynth {

enum class CopulaFamily { independence, gaussian, clayton, gumbel, frank };

inline std::string to_string(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::independence: return "independence";
    case CopulaFamily::gaussian: return "gaussian";
    case CopulaFamily::clayton: return "clayton";
    case CopulaFamily::gumbel: return "gumbel";
    case CopulaFamily::frank: return "frank";
  }
  return "?";
}

inline CopulaFamily copula_family_from_string(const std::string& s) {
  for (auto f : {CopulaFamily::independence, CopulaFamily::gaussian, CopulaFamily::clayton, CopulaFamily::gumbel,
                 CopulaFamily::frank}) {
    if (to_string(f) == s) return f;
  }
  throw ArgumentError("unknown copula family '" + s + "'");
}

inline const std::vector<CopulaFamily>& all_copula_families() {
  static const std::vector<CopulaFamily> all{CopulaFamily::independence, CopulaFamily::gaussian, CopulaFamily::clayton,
                                             CopulaFamily::gumbel, CopulaFamily::frank};
  return all;
}

// Families whose rotations are meaningful (not radially/reflection symmetric).
inline bool is_rotatable(CopulaFamily f) { return f == CopulaFamily::clayton || f == CopulaFamily::gumbel; }

namespace copula_detail {

constexpr double kTrim = 1e-10;

inline double trim(double u) { return std::clamp(u, kTrim, 1.0 - kTrim); }

// log(e^a + e^b - 1) for a, b >= 0.
inline double log_sum_minus_one(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
}

// --- Base (unrotated, exchangeable) families. h0(u|v) = dC0/dv. ---

inline double gaussian_h(double rho, double u, double v) {
  const double x = normal_quantile(u), y = normal_quantile(v);
  return normal_cdf((x - rho * y) / std::sqrt(1.0 - rho * rho));
}

inline double gaussian_hinv(double rho, double p, double v) {
  return normal_cdf(normal_quantile(p) * std::sqrt(1.0 - rho * rho) + rho * normal_quantile(v));
}

inline double gaussian_log_pdf(double rho, double u, double v) {
  const double x = normal_quantile(u), y = normal_quantile(v);
  const double r2 = rho * rho;
  return -0.5 * std::log1p(-r2) - (r2 * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * (1.0 - r2));
}

inline double clayton_h(double theta, double u, double v) {
  const double a = -theta * std::log(u), b = -theta * std::log(v);
  return std::exp((-theta - 1.0) * std::log(v) + (-1.0 / theta - 1.0) * log_sum_minus_one(a, b));
}

inline double clayton_hinv(double theta, double p, double v) {
  const double b = -theta * std::log(v);
  const double a = -theta / (theta + 1.0) * std::log(p) + b;  // log of (p v^(theta+1))^(-theta/(theta+1))
  // u^-theta = e^a + 1 - e^b = e^b (expm1(a - b) + e^-b)
  const double log_x = b + std::log(std::expm1(a - b) + std::exp(-b));
  return std::exp(-log_x / theta);
}

inline double clayton_log_pdf(double theta, double u, double v) {
  const double lu = std::log(u), lv = std::log(v);
  return std::log1p(theta) + (-1.0 - theta) * (lu + lv) +
         (-2.0 - 1.0 / theta) * log_sum_minus_one(-theta * lu, -theta * lv);
}

inline double gumbel_h(double theta, double u, double v) {
  const double x = -std::log(u), y = -std::log(v);
  const double s = std::pow(x, theta) + std::pow(y, theta);
  const double log_h = -std::pow(s, 1.0 / theta) + y + (theta - 1.0) * std::log(y) + (1.0 / theta - 1.0) * std::log(s);
  return std::exp(log_h);
}

inline double gumbel_log_pdf(double theta, double u, double v) {
  const double x = -std::log(u), y = -std::log(v);
  const double s = std::pow(x, theta) + std::pow(y, theta);
  const double s_inv = std::pow(s, 1.0 / theta);
  return -s_inv + x + y + (theta - 1.0) * (std::log(x) + std::log(y)) + (1.0 / theta - 2.0) * std::log(s) +
         std::log(s_inv + theta - 1.0);
}

// With x = e^{-theta u}, y = e^{-theta v}: the copula denominator equals
// x (1-y) + (y - e^{-theta}), two terms of equal sign.
inline double frank_denominator(double theta, double u, double v) {
  const double x = std::exp(-theta * u), y = std::exp(-theta * v);
  return -x * std::expm1(-theta * v) - y * std::expm1(-theta * (1.0 - v));
}

inline double frank_h(double theta, double u, double v) {
  return -std::exp(-theta * v) * std::expm1(-theta * u) / frank_denominator(theta, u, v);
}

inline double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// exp(-theta u) = ((1-p) e^{-theta v} + p e^{-theta}) / (p + (1-p) e^{-theta v}),
// evaluated in logs so that neither side cancels.
inline double frank_hinv(double theta, double p, double v) {
  const double lp = std::log(p), lq = std::log1p(-p);
  const double num = log_add_exp(lq - theta * v, lp - theta);
  const double den = log_add_exp(lp, lq - theta * v);
  return -(num - den) / theta;
}

inline double frank_log_pdf(double theta, double u, double v) {
  const double c = std::expm1(-theta);
  return std::log(-theta * c) - theta * (u + v) - 2.0 * std::log(std::fabs(frank_denominator(theta, u, v)));
}

inline double frank_tau(double theta) {
  if (theta == 0.0) return 0.0;
  const double t = std::fabs(theta);
  const double tau = 1.0 - 4.0 / t * (1.0 - debye1(t));
  return theta > 0 ? tau : -tau;
}

}  // namespace copula_detail

// Kendall's tau of the unrotated family at `parameter`.
inline double parameter_to_tau(CopulaFamily family, double parameter) {
  switch (family) {
    case CopulaFamily::independence: return 0.0;
    case CopulaFamily::gaussian: return 2.0 / std::numbers::pi * std::asin(parameter);
    case CopulaFamily::clayton: return parameter / (parameter + 2.0);
    case CopulaFamily::gumbel: return 1.0 - 1.0 / parameter;
    case CopulaFamily::frank: return copula_detail::frank_tau(parameter);
  }
  return 0.0;
}

// Parameter of the unrotated family with Kendall's tau equal to `tau`.
// Clayton and Gumbel need tau in [0, 1); gaussian and frank accept (-1, 1).
inline double tau_to_parameter(CopulaFamily family, double tau) {
  if (!(tau > -1.0 && tau < 1.0)) throw ArgumentError("tau must lie in (-1,1)");
  switch (family) {
    case CopulaFamily::independence: return 0.0;
    case CopulaFamily::gaussian: return std::sin(std::numbers::pi * tau / 2.0);
    case CopulaFamily::clayton:
      if (tau < 0) throw ArgumentError("clayton requires tau >= 0");
      return 2.0 * tau / (1.0 - tau);
    case CopulaFamily::gumbel:
      if (tau < 0) throw ArgumentError("gumbel requires tau >= 0");
      return 1.0 / (1.0 - tau);
    case CopulaFamily::frank: {
      if (tau == 0.0) throw ArgumentError("frank has no parameter for tau = 0");
      const double target = std::fabs(tau);
      // tau(theta) is increasing; bracket then bisect.
      double lo = 0.0, hi = 1.0;
      while (copula_detail::frank_tau(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e4) throw NumericError("frank tau inversion diverged");
      }
      for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (copula_detail::frank_tau(mid) < target ? lo : hi) = mid;
      }
      const double theta = 0.5 * (lo + hi);
      return tau > 0 ? theta : -theta;
    }
  }
  return 0.0;
}

class BivariateCopula {
 public:
  BivariateCopula() = default;

  // rotation in {0, 90, 180, 270}; only clayton/gumbel may be rotated.
  BivariateCopula(CopulaFamily family, double parameter, int rotation = 0)
      : family_(family), parameter_(parameter), rotation_(rotation) {
    validate();
    fitted_tau_ = tau();
  }

  static BivariateCopula independence() { return {}; }

  CopulaFamily family() const { return family_; }
  double parameter() const { return parameter_; }
  int rotation() const { return rotation_; }
  double fitted_tau() const { return fitted_tau_; }
  double loglik() const { return loglik_; }

  void set_fit_info(double fitted_tau, double loglik) {
    fitted_tau_ = fitted_tau;
    loglik_ = loglik;
  }

  std::string name() const {
    std::string s = to_string(family_);
    if (rotation_ != 0) s += "_" + std::to_string(rotation_);
    return s;
  }

  double tau() const {
    const double t = parameter_to_tau(family_, parameter_);
    return (rotation_ == 90 || rotation_ == 270) ? -t : t;
  }

  double log_pdf(double u, double v) const {
    if (family_ == CopulaFamily::independence) return 0.0;
    u = copula_detail::trim(u);
    v = copula_detail::trim(v);
    switch (rotation_) {
      case 90: return base_log_pdf(1.0 - u, v);
      case 180: return base_log_pdf(1.0 - u, 1.0 - v);
      case 270: return base_log_pdf(u, 1.0 - v);
      default: return base_log_pdf(u, v);
    }
  }

  double pdf(double u, double v) const { return std::exp(log_pdf(u, v)); }

  double hfunc2(double u, double v) const {
    if (family_ == CopulaFamily::independence) return u;
    u = copula_detail::trim(u);
    v = copula_detail::trim(v);
    double h = 0.0;
    switch (rotation_) {
      case 90: h = 1.0 - base_h(1.0 - u, v); break;
      case 180: h = 1.0 - base_h(1.0 - u, 1.0 - v); break;
      case 270: h = base_h(u, 1.0 - v); break;
      default: h = base_h(u, v); break;
    }
    return copula_detail::trim(h);
  }

  double hfunc1(double u, double v) const {
    if (family_ == CopulaFamily::independence) return v;
    u = copula_detail::trim(u);
    v = copula_detail::trim(v);
    double h = 0.0;
    switch (rotation_) {
      case 90: h = base_h(v, 1.0 - u); break;
      case 180: h = 1.0 - base_h(1.0 - v, 1.0 - u); break;
      case 270: h = 1.0 - base_h(1.0 - v, u); break;
      default: h = base_h(v, u); break;
    }
    return copula_detail::trim(h);
  }

  double hinv2(double p, double v) const {
    if (family_ == CopulaFamily::independence) return p;
    p = copula_detail::trim(p);
    v = copula_detail::trim(v);
    double u = 0.0;
    switch (rotation_) {
      case 90: u = 1.0 - base_hinv(1.0 - p, v); break;
      case 180: u = 1.0 - base_hinv(1.0 - p, 1.0 - v); break;
      case 270: u = base_hinv(p, 1.0 - v); break;
      default: u = base_hinv(p, v); break;
    }
    return copula_detail::trim(u);
  }

  double hinv1(double p, double u) const {
    if (family_ == CopulaFamily::independence) return p;
    p = copula_detail::trim(p);
    u = copula_detail::trim(u);
    double v = 0.0;
    switch (rotation_) {
      case 90: v = base_hinv(p, 1.0 - u); break;
      case 180: v = 1.0 - base_hinv(1.0 - p, 1.0 - u); break;
      case 270: v = 1.0 - base_hinv(1.0 - p, u); break;
      default: v = base_hinv(p, u); break;
    }
    return copula_detail::trim(v);
  }

  double log_likelihood(const std::vector<double>& u, const std::vector<double>& v) const {
    if (family_ == CopulaFamily::independence) return 0.0;
    double ll = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double l = log_pdf(u[i], v[i]);
      ll += std::isfinite(l) ? l : -700.0;
    }
    return ll;
  }

 private:
  void validate() const {
    if (rotation_ != 0 && rotation_ != 90 && rotation_ != 180 && rotation_ != 270) {
      throw ArgumentError("rotation must be 0, 90, 180 or 270");
    }
    if (rotation_ != 0 && !is_rotatable(family_)) {
      throw ArgumentError(to_string(family_) + " copula does not take a rotation");
    }
    switch (family_) {
      case CopulaFamily::independence: break;
      case CopulaFamily::gaussian:
        if (!(parameter_ > -1.0 && parameter_ < 1.0)) throw ArgumentError("gaussian copula needs rho in (-1,1)");
        break;
      case CopulaFamily::clayton:
        if (!(parameter_ > 0.0)) throw ArgumentError("clayton copula needs theta > 0");
        break;
      case CopulaFamily::gumbel:
        if (!(parameter_ >= 1.0)) throw ArgumentError("gumbel copula needs theta >= 1");
        break;
      case CopulaFamily::frank:
        if (parameter_ == 0.0 || !std::isfinite(parameter_)) throw ArgumentError("frank copula needs theta != 0");
        break;
    }
  }

  double base_log_pdf(double u, double v) const {
    switch (family_) {
      case CopulaFamily::gaussian: return copula_detail::gaussian_log_pdf(parameter_, u, v);
      case CopulaFamily::clayton: return copula_detail::clayton_log_pdf(parameter_, u, v);
      case CopulaFamily::gumbel: return copula_detail::gumbel_log_pdf(parameter_, u, v);
      case CopulaFamily::frank: return copula_detail::frank_log_pdf(parameter_, u, v);
      default: return 0.0;
    }
  }

  double base_h(double u, double v) const {
    switch (family_) {
      case CopulaFamily::gaussian: return copula_detail::gaussian_h(parameter_, u, v);
      case CopulaFamily::clayton: return copula_detail::clayton_h(parameter_, u, v);
      case CopulaFamily::gumbel: return copula_detail::gumbel_h(parameter_, u, v);
      case CopulaFamily::frank: return copula_detail::frank_h(parameter_, u, v);
      default: return u;
    }
  }

  double base_hinv(double p, double v) const {
    switch (family_) {
      case CopulaFamily::gaussian: return copula_detail::gaussian_hinv(parameter_, p, v);
      case CopulaFamily::clayton: return copula_detail::clayton_hinv(parameter_, p, v);
      case CopulaFamily::frank: return copula_detail::frank_hinv(parameter_, p, v);
      case CopulaFamily::gumbel: return solve_base_h(p, v);
      default: return p;
    }
  }

  // Safeguarded Newton on u in (0,1); dh/du is the copula density.
  double solve_base_h(double p, double v) const {
    using copula_detail::kTrim;
    // Roots outside the trimmed domain end up trimmed anyway.
    if (base_h(kTrim, v) >= p) return kTrim;
    if (base_h(1.0 - kTrim, v) <= p) return 1.0 - kTrim;
    double lo = kTrim, hi = 1.0 - kTrim, u = std::clamp(p, lo, hi);
    for (int it = 0; it < 200; ++it) {
      const double f = base_h(u, v) - p;
      if (std::fabs(f) <= 1e-15) return u;
      (f < 0 ? lo : hi) = u;
      if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(u, 1e-300)) return u;
      const double slope = std::exp(base_log_pdf(u, v));
      double next = u - f / slope;
      if (!std::isfinite(next) || next <= lo || next >= hi) {
        next = 0.5 * (lo + hi);
      } else if (std::fabs(next - u) <= 4.0 * std::numeric_limits<double>::epsilon() * u) {
        return next;  // Newton has stalled at rounding level
      }
      u = next;
    }
    if (hi - lo > 1e-12) {
      throw NumericError("h-function inversion did not converge (theta " + std::to_string(parameter_) + ", p " +
                         std::to_string(p) + ", v " + std::to_string(v) + ")");
    }
    return u;
  }

  CopulaFamily family_ = CopulaFamily::independence;
  double parameter_ = 0.0;
  int rotation_ = 0;
  double fitted_tau_ = 0.0;
  double loglik_ = 0.0;
};

inline double h_function(const BivariateCopula& c, double u, double v) {
  if (!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) throw ArgumentError("h_function requires u, v in (0,1)");
  return c.hfunc2(u, v);
}

inline double h_inverse(const BivariateCopula& c, double p, double v) {
  if (!(p > 0.0 && p < 1.0 && v > 0.0 && v < 1.0)) throw ArgumentError("h_inverse requires p, v in (0,1)");
  return c.hinv2(p, v);
}

struct PairFitOptions {
  double independence_critical = 1.645;  // compared with the absolute z statistic
  double max_abs_tau = 0.95;
  double refine_halfwidth = 0.1;  // tau units around the inversion estimate
  double golden_tolerance = 1e-6;
};

// Asymptotic z statistic of Kendall's tau under independence.
inline double tau_independence_statistic(double tau, std::size_t n) {
  const double nn = static_cast<double>(n);
  return std::fabs(tau) * std::sqrt(9.0 * nn * (nn - 1.0) / (2.0 * (2.0 * nn + 5.0)));
}

namespace copula_detail {

template <typename F>
double golden_section_max(F f, double a, double b, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (std::fabs(b - a) > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace copula_detail

// Kendall-tau inversion per candidate family, refined by a one-dimensional
// golden-section search on the log-likelihood; the best log-likelihood wins.
// Weak dependence (tau independence test not significant) gives independence.
inline BivariateCopula fit_pair_copula(const std::vector<double>& u, const std::vector<double>& v,
                                       const std::vector<CopulaFamily>& families = all_copula_families(),
                                       const PairFitOptions& opt = {}) {
  if (u.size() != v.size()) throw ArgumentError("fit_pair_copula: length mismatch");
  if (u.size() < 10) throw ArgumentError("fit_pair_copula: need at least 10 observations");
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] > 0.0 && u[i] < 1.0 && v[i] > 0.0 && v[i] < 1.0)) {
      throw ArgumentError("fit_pair_copula: observations must lie strictly inside (0,1)");
    }
  }
  const Correlation kt = kendall_tau(u, v);
  const double tau_hat = std::clamp(kt.value, -opt.max_abs_tau, opt.max_abs_tau);
  if (kt.degenerate || tau_independence_statistic(kt.value, u.size()) < opt.independence_critical) {
    return BivariateCopula::independence();
  }

  std::optional<BivariateCopula> best;
  const double sign = tau_hat > 0 ? 1.0 : -1.0;
  const double abs_tau = std::fabs(tau_hat);
  constexpr double min_abs_tau = 1e-3;

  auto consider = [&](CopulaFamily family, int rotation, double base_tau) {
    // base_tau is the tau of the unrotated family
    const bool signed_family = !is_rotatable(family);
    const double lo_tau = signed_family
                              ? (sign > 0 ? std::max(min_abs_tau, base_tau - opt.refine_halfwidth)
                                          : std::max(-opt.max_abs_tau, base_tau - opt.refine_halfwidth))
                              : std::max(min_abs_tau, base_tau - opt.refine_halfwidth);
    const double hi_tau = signed_family
                              ? (sign > 0 ? std::min(opt.max_abs_tau, base_tau + opt.refine_halfwidth)
                                          : std::min(-min_abs_tau, base_tau + opt.refine_halfwidth))
                              : std::min(opt.max_abs_tau, base_tau + opt.refine_halfwidth);
    const double lo = tau_to_parameter(family, lo_tau);
    const double hi = tau_to_parameter(family, hi_tau);
    auto ll = [&](double theta) { return BivariateCopula(family, theta, rotation).log_likelihood(u, v); };
    const double theta = copula_detail::golden_section_max(ll, lo, hi, opt.golden_tolerance);
    BivariateCopula c(family, theta, rotation);
    c.set_fit_info(c.tau(), c.log_likelihood(u, v));
    if (!best || c.loglik() > best->loglik()) best = c;
  };

  for (CopulaFamily family : families) {
    switch (family) {
      case CopulaFamily::independence: break;
      case CopulaFamily::gaussian:
      case CopulaFamily::frank: consider(family, 0, tau_hat); break;
      case CopulaFamily::clayton:
      case CopulaFamily::gumbel:
        if (sign > 0) {
          consider(family, 0, abs_tau);
          consider(family, 180, abs_tau);
        } else {
          consider(family, 90, abs_tau);
          consider(family, 270, abs_tau);
        }
        break;
    }
  }
  if (!best) return BivariateCopula::independence();
  return *best;
}

}  // namespace rctsynth
