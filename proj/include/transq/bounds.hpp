#pragma once

// Closed-form tail-bound evaluators and the Monte Carlo machinery that
// validates them: two-regime sub-exponential bounds for partial-sum maxima,
// the KMT empirical-process constants, the classical DKW bound, the
// time-changed Brownian motion bound, exceedance estimates with binomial
// confidence intervals, and conservative fits of the DKW-style inequality
// constants that the theory leaves unspecified.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "transq/distributions.hpp"

namespace transq {

// ---------------------------------------------------------------------------
// sub-exponential parameters and bounds

struct SubExpParams {
  double nu = 0.0;        // sqrt(2 Var X)
  double m = 0.0;         // E[e^{2 lambda |X-mu|}] < 4 for all |lambda| < 1/m
  double mean = 0.0;
  double variance = 0.0;
};

// nu from the variance; m by bisection on the smallest value such that
// E[e^{2 lambda |X-mu|}] < 4 for all |lambda| < 1/m. Degenerate laws get
// m = 0 (every lambda works).
inline SubExpParams subexp_params(const DistributionSpec& spec, double rel_tol = 1e-9) {
  SubExpParams out;
  out.mean = spec.mean;
  out.variance = spec.sd * spec.sd;
  out.nu = std::sqrt(2.0 * out.variance);
  if (spec.sd == 0.0) return out;
  auto g = [&](double lambda) { return exp_abs_moment(spec, 2.0 * lambda); };
  if (!(g(1e-12) < 4.0)) throw std::invalid_argument("subexp_params: mgf divergent near zero");
  double lo = 1e-12, hi = lo;
  for (int i = 0; i < 200 && g(hi) < 4.0; ++i) {
    lo = hi;
    hi *= 2.0;
  }
  if (g(hi) < 4.0) throw std::invalid_argument("subexp_params: bisection bracket not found");
  while (hi - lo > rel_tol * hi) {
    double mid = 0.5 * (lo + hi);
    (g(mid) < 4.0 ? lo : hi) = mid;
  }
  out.m = 1.0 / (0.5 * (lo + hi));
  return out;
}

// P(|S_n - n mu| >= n t), and via Doob also the maximal version:
//   2 exp(-n t^2 / (2 nu^2))   for 0 <= t <= nu^2 / m
//   2 exp(-n t / (2 m))        for t > nu^2 / m
// The two expressions agree at the regime boundary. Vacuous values > 1 are
// returned as-is.
inline double subexp_tail_bound(const SubExpParams& pr, long long n, double t) {
  if (t < 0.0) throw std::domain_error("subexp_tail_bound: t must be nonnegative");
  if (pr.m == 0.0) return t > 0.0 ? 0.0 : 2.0;
  double nd = static_cast<double>(n);
  if (t <= pr.nu * pr.nu / pr.m) return 2.0 * std::exp(-nd * t * t / (2.0 * pr.nu * pr.nu));
  return 2.0 * std::exp(-nd * t / (2.0 * pr.m));
}

// ---------------------------------------------------------------------------
// KMT empirical-process and DKW bounds

// P( sup sqrt(n)|alpha_n - B^br| > C log n + x ) < K e^{-lambda x}
// with C=100, K=10, lambda=1/50.
struct DkwEmpBound {
  double threshold;
  double tail;
};

inline DkwEmpBound dkw_emp_bound(long long n, double x) {
  return {100.0 * std::log(static_cast<double>(n)) + x, 10.0 * std::exp(-x / 50.0)};
}

// classical DKW: P(sup|G_n - G| > eps) <= 2 e^{-2 n eps^2}
inline double classical_dkw_bound(long long n, double eps) {
  return 2.0 * std::exp(-2.0 * static_cast<double>(n) * eps * eps);
}

// ---------------------------------------------------------------------------
// time-changed Brownian motion bound

struct TimeChangeBoundParams {
  double k0 = 0.0, k1 = 0.0, k2 = 0.0, k3 = 0.0;  // DKW-inequality constants
  double gamma = 1.0;                              // in (0,4)
  double c_xi = 1.0;                               // Lipschitz constant of the fluid limit
  double horizon = 1.0;                            // L_n
  double upsilon_sq = 0.0;                         // sup_s E|Xi_n(s) - xi_n(s)|
  double C = 1.0;                                  // leading constant (fit, not specified)
};

struct TimeChangeBound {
  double threshold;  // C sqrt(log((c_xi L) v n)) / n^{1/4} + x
  double tail;       // 2 exp(-x^2 / (2 upsilon^2))
};

inline TimeChangeBound timechanged_bm_bound(const TimeChangeBoundParams& pr, long long n, double x) {
  if (!(pr.gamma > 0.0 && pr.gamma < 4.0))
    throw std::invalid_argument("timechanged_bm_bound: gamma outside (0,4)");
  double nd = static_cast<double>(n);
  double arg = std::max(pr.c_xi * pr.horizon, nd);
  double threshold = pr.C * std::sqrt(std::log(arg)) / std::pow(nd, 0.25) + x;
  double tail = pr.upsilon_sq > 0.0 ? 2.0 * std::exp(-x * x / (2.0 * pr.upsilon_sq))
                                    : (x > 0.0 ? 0.0 : 2.0);
  return {threshold, tail};
}

// ---------------------------------------------------------------------------
// empirical validation statistics

struct ExceedanceEstimate {
  double estimate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  long long exceed = 0;
  long long total = 0;
};

// Share of samples strictly above the threshold, with a 95% Wilson interval
// (rule-of-three upper bound when nothing exceeds).
inline ExceedanceEstimate empirical_exceedance(std::span<const double> samples, double threshold) {
  if (samples.empty()) throw std::invalid_argument("empirical_exceedance: empty sample");
  ExceedanceEstimate out;
  out.total = static_cast<long long>(samples.size());
  for (double s : samples)
    if (s > threshold) ++out.exceed;
  double n = static_cast<double>(out.total);
  out.estimate = static_cast<double>(out.exceed) / n;
  if (out.exceed == 0) {
    out.ci_lo = 0.0;
    out.ci_hi = 3.0 / n;
    return out;
  }
  const double z = 1.959963984540054;
  double phat = out.estimate, z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (phat + z2 / (2.0 * n)) / denom;
  double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  out.ci_lo = std::max(0.0, center - half);
  out.ci_hi = std::min(1.0, center + half);
  return out;
}

// One bound-domination probe: empirical exceedance against a claimed bound,
// accepted when empirical <= bound + 3 binomial SE (SE taken at the bound).
// Vacuous bounds (>= 1) pass by definition.
struct DominationCheck {
  double threshold = 0.0;
  double bound = 0.0;
  ExceedanceEstimate empirical;
  bool pass = true;
};

inline DominationCheck check_domination(std::span<const double> samples, double threshold,
                                        double bound) {
  DominationCheck out;
  out.threshold = threshold;
  out.bound = bound;
  out.empirical = empirical_exceedance(samples, threshold);
  if (bound < 1.0) {
    double se = std::sqrt(bound * (1.0 - bound) / static_cast<double>(out.empirical.total));
    out.pass = out.empirical.estimate <= bound + 3.0 * se;
  }
  return out;
}

// ---------------------------------------------------------------------------
// conservative fit of the Assumption-4.3 constants

struct TailPoint {
  long long n = 0;
  double eps = 0.0;        // threshold already includes any k0 log(n)/n or 2/n shift
  double empirical = 0.0;  // observed P(sup > eps + shift)
};

// k_1 e^{-(k_2 n^gamma eps^2) ^ (k_3 n^gamma eps)}-style inequality with
// fitted k_2, k_3: the largest constants that still dominate every fit
// point (k_1 pinned at 2). Fit on part of the data, check on the rest.
struct Assumption43Fit {
  double gamma = 1.0;
  double k1 = 2.0;
  double k2 = 1.0;
  double k3 = std::numeric_limits<double>::infinity();

  double bound(long long n, double eps) const {
    double ng = std::pow(static_cast<double>(n), gamma);
    double expo = std::min(k2 * ng * eps * eps, k3 * ng * eps);
    return k1 * std::exp(-expo);
  }
};

inline Assumption43Fit fit_assumption43(std::span<const TailPoint> pts, double gamma,
                                        double k1 = 2.0) {
  Assumption43Fit fit;
  fit.gamma = gamma;
  fit.k1 = k1;
  double k2 = std::numeric_limits<double>::infinity();
  double k3 = std::numeric_limits<double>::infinity();
  for (const auto& pt : pts) {
    if (pt.empirical <= 0.0) continue;
    double L = std::log(k1 / pt.empirical);
    double ng = std::pow(static_cast<double>(pt.n), gamma);
    k2 = std::min(k2, L / (ng * pt.eps * pt.eps));
    k3 = std::min(k3, L / (ng * pt.eps));
  }
  if (std::isfinite(k2)) fit.k2 = k2;
  if (std::isfinite(k3)) fit.k3 = k3;
  return fit;
}

}  // namespace transq
