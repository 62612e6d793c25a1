#pragma once

// Numeric kernels shared across the library: standard normal cdf/quantile
// and tail-aware wrappers around the regularized incomplete gamma/beta
// inverses. Everything here is required to hold ~1e-12 absolute accuracy or
// better; the unit tests probe that directly.

#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace transq {

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244008443621048490);
}

// Phi(-x), computed without cancellation for large x.
inline double normal_cdf_c(double x) { return normal_cdf(-x); }

inline double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("normal_quantile: u must lie in (0,1)");
  return -1.4142135623730950488016887242096981 * boost::math::erfc_inv(2.0 * u);
}

// Inverse of the regularized incomplete beta I_x(a,b); uses the complement
// uc = 1-u when u > 1/2 so both tails keep full precision.
inline double beta_quantile(double a, double b, double u, double uc) {
  if (u <= 0.0) return 0.0;
  if (uc <= 0.0) return 1.0;
  return u <= 0.5 ? boost::math::ibeta_inv(a, b, u) : boost::math::ibetac_inv(a, b, uc);
}

// Quantile of Gamma(shape, scale=1) through the regularized P/Q inverses.
inline double gamma_unit_quantile(double shape, double u, double uc) {
  if (u <= 0.0) return 0.0;
  if (uc <= 0.0) return std::numeric_limits<double>::infinity();
  return u <= 0.5 ? boost::math::gamma_p_inv(shape, u) : boost::math::gamma_q_inv(shape, uc);
}

inline double sqr(double x) { return x * x; }

}  // namespace transq
