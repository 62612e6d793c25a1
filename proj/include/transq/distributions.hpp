#pragma once

// Distribution specifications for arrival and service laws: cdf evaluation,
// the sup-type generalized inverse G^{-1}(u) = sup{x : G(x) <= u},
// empirical distribution functions, and sup distances between cdfs.
//
// The built-in mixture family G^{(n)} = (1 - a/sqrt(n)) G + (a/sqrt(n)) Gt
// realizes arrival sequences with r_n(G) = sup|G^{(n)} - G| = O(1/sqrt(n))
// by construction. Unbounded supports are truncated at an optional
// configured horizon; quantile(1) reports that truncation point.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "transq/special.hpp"

namespace transq {

struct DistributionSpec;

struct Uniform01 {};
struct Exponential {
  double rate;
};
struct GammaDist {
  double shape;
  double scale;
};
struct BernoulliDist {
  double p;
};
struct GaussianDist {
  double mean;
  double sd;  // sd == 0 is the deterministic atom at `mean`
};
// Piecewise-linear cdf through (t_i, g_i); right-continuous jump of size
// g_0 at t_0 allowed, g must reach 1 at the last knot.
struct CdfTable {
  std::vector<double> t;
  std::vector<double> g;
};
struct MixtureDist {
  std::shared_ptr<const DistributionSpec> base;
  std::shared_ptr<const DistributionSpec> tilt;
  double weight;  // cdf = (1-weight)*base + weight*tilt
};

using FamilyVariant =
    std::variant<Uniform01, Exponential, GammaDist, BernoulliDist, GaussianDist, CdfTable, MixtureDist>;

struct Support {
  double lo;
  double hi;
};

struct DistributionSpec {
  FamilyVariant family;
  double mean = 0.0;
  double sd = 0.0;
  Support support{0.0, 0.0};
  std::optional<double> cdf_lipschitz;  // set when the cdf is Lipschitz
  std::optional<double> truncate_at;    // horizon for quantile(1) on unbounded support
};

inline DistributionSpec uniform01() {
  return {Uniform01{}, 0.5, std::sqrt(1.0 / 12.0), {0.0, 1.0}, 1.0, std::nullopt};
}

inline DistributionSpec exponential(double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
  return {Exponential{rate}, 1.0 / rate, 1.0 / rate,
          {0.0, std::numeric_limits<double>::infinity()}, rate, std::nullopt};
}

inline DistributionSpec gamma_dist(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("gamma: shape/scale must be positive");
  std::optional<double> lip;
  if (shape >= 1.0) {
    double mode = (shape - 1.0) * scale;
    lip = shape > 1.0 ? std::exp((shape - 1.0) * std::log(mode / scale) - mode / scale -
                                 std::lgamma(shape)) / scale
                      : 1.0 / scale;  // shape==1: pdf max at 0
  }
  return {GammaDist{shape, scale}, shape * scale, std::sqrt(shape) * scale,
          {0.0, std::numeric_limits<double>::infinity()}, lip, std::nullopt};
}

inline DistributionSpec bernoulli(double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("bernoulli: p outside [0,1]");
  return {BernoulliDist{p}, p, std::sqrt(p * (1.0 - p)), {0.0, 1.0}, std::nullopt, std::nullopt};
}

inline DistributionSpec gaussian(double mean, double sd) {
  if (sd < 0.0) throw std::invalid_argument("gaussian: sd must be nonnegative");
  if (sd == 0.0) return {GaussianDist{mean, 0.0}, mean, 0.0, {mean, mean}, std::nullopt, std::nullopt};
  return {GaussianDist{mean, sd}, mean, sd,
          {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
          1.0 / (sd * std::sqrt(8.0 * std::atan(1.0) * 2.0)), std::nullopt};
}

inline DistributionSpec cdf_table(std::vector<double> t, std::vector<double> g) {
  if (t.size() < 2 || t.size() != g.size())
    throw std::invalid_argument("cdf_table: need matching t/g with at least 2 rows");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw std::invalid_argument("cdf_table: t must be strictly increasing");
    if (g[i] < g[i - 1]) throw std::invalid_argument("cdf_table: cdf must be nondecreasing");
  }
  if (g.front() < 0.0 || std::abs(g.back() - 1.0) > 1e-12)
    throw std::invalid_argument("cdf_table: cdf must stay in [0,1] and reach 1");
  double m1 = g.front() * t.front(), m2 = g.front() * t.front() * t.front();
  double max_slope = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    double dg = g[i + 1] - g[i];
    m1 += dg * 0.5 * (t[i] + t[i + 1]);
    m2 += dg * (t[i] * t[i] + t[i] * t[i + 1] + t[i + 1] * t[i + 1]) / 3.0;
    max_slope = std::max(max_slope, dg / (t[i + 1] - t[i]));
  }
  double var = std::max(0.0, m2 - m1 * m1);
  std::optional<double> lip;
  if (g.front() == 0.0) lip = max_slope;
  Support sup{t.front(), t.back()};
  return {CdfTable{std::move(t), std::move(g)}, m1, std::sqrt(var), sup, lip, std::nullopt};
}

inline double cdf(const DistributionSpec& spec, double x);

// (1 - a/sqrt(n)) G + (a/sqrt(n)) Gt, the built-in Assumption-2.4 family.
inline DistributionSpec mixture_gn(const DistributionSpec& base, const DistributionSpec& tilt,
                                   double a, long long n) {
  if (!(a >= 0.0)) throw std::invalid_argument("mixture_gn: coefficient must be nonnegative");
  double w = a / std::sqrt(static_cast<double>(n));
  if (w > 1.0) throw std::invalid_argument("mixture_gn: a/sqrt(n) exceeds 1");
  if (w == 0.0) return base;  // exact reduction to the limit law
  double m1 = (1.0 - w) * base.mean + w * tilt.mean;
  double m2 = (1.0 - w) * (base.sd * base.sd + base.mean * base.mean) +
              w * (tilt.sd * tilt.sd + tilt.mean * tilt.mean);
  std::optional<double> lip;
  if (base.cdf_lipschitz && tilt.cdf_lipschitz)
    lip = (1.0 - w) * *base.cdf_lipschitz + w * *tilt.cdf_lipschitz;
  Support sup{std::min(base.support.lo, tilt.support.lo), std::max(base.support.hi, tilt.support.hi)};
  std::optional<double> trunc;
  if (base.truncate_at || tilt.truncate_at)
    trunc = std::max(base.truncate_at.value_or(0.0), tilt.truncate_at.value_or(0.0));
  return {MixtureDist{std::make_shared<DistributionSpec>(base), std::make_shared<DistributionSpec>(tilt), w},
          m1, std::sqrt(std::max(0.0, m2 - m1 * m1)), sup, lip, trunc};
}

inline double cdf(const DistributionSpec& spec, double x) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Uniform01>) {
          return std::clamp(x, 0.0, 1.0);
        } else if constexpr (std::is_same_v<T, Exponential>) {
          return x <= 0.0 ? 0.0 : -std::expm1(-f.rate * x);
        } else if constexpr (std::is_same_v<T, GammaDist>) {
          return x <= 0.0 ? 0.0 : boost::math::gamma_p(f.shape, x / f.scale);
        } else if constexpr (std::is_same_v<T, BernoulliDist>) {
          if (x < 0.0) return 0.0;
          if (x < 1.0) return 1.0 - f.p;
          return 1.0;
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          if (f.sd == 0.0) return x < f.mean ? 0.0 : 1.0;
          return normal_cdf((x - f.mean) / f.sd);
        } else if constexpr (std::is_same_v<T, CdfTable>) {
          if (x < f.t.front()) return 0.0;
          if (x >= f.t.back()) return 1.0;
          auto it = std::upper_bound(f.t.begin(), f.t.end(), x);
          std::size_t i = static_cast<std::size_t>(it - f.t.begin()) - 1;
          double w = (x - f.t[i]) / (f.t[i + 1] - f.t[i]);
          return f.g[i] + w * (f.g[i + 1] - f.g[i]);
        } else {  // MixtureDist
          return (1.0 - f.weight) * cdf(*f.base, x) + f.weight * cdf(*f.tilt, x);
        }
      },
      spec.family);
}

// left limit of the cdf, needed for exact sup distances across jumps
inline double cdf_left(const DistributionSpec& spec, double x) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, BernoulliDist>) {
          if (x <= 0.0) return 0.0;
          if (x <= 1.0) return 1.0 - f.p;
          return 1.0;
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          if (f.sd == 0.0) return x <= f.mean ? 0.0 : 1.0;
          return cdf(spec, x);
        } else if constexpr (std::is_same_v<T, CdfTable>) {
          if (x <= f.t.front()) return 0.0;  // jump of g_0 at t_0
          return cdf(spec, x);
        } else if constexpr (std::is_same_v<T, MixtureDist>) {
          return (1.0 - f.weight) * cdf_left(*f.base, x) + f.weight * cdf_left(*f.tilt, x);
        } else {
          return cdf(spec, x);
        }
      },
      spec.family);
}

namespace detail {
inline double quantile_unbounded_one(const DistributionSpec& spec) {
  if (spec.truncate_at) return *spec.truncate_at;
  throw std::invalid_argument("quantile: u=1 on unbounded support needs a configured truncation horizon");
}
}  // namespace detail

// Sup-type generalized inverse G^{-1}(u) = sup{x : G(x) <= u}. Satisfies
// G(x) <= u iff x <= G^{-1}(u) on the support for continuous strictly
// increasing G. u = 1 on an unbounded support returns the configured
// truncation horizon.
inline double quantile(const DistributionSpec& spec, double u) {
  if (u < 0.0 || u > 1.0) throw std::domain_error("quantile: u outside [0,1]");
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Uniform01>) {
          return u;
        } else if constexpr (std::is_same_v<T, Exponential>) {
          if (u == 1.0) return detail::quantile_unbounded_one(spec);
          return -std::log1p(-u) / f.rate;
        } else if constexpr (std::is_same_v<T, GammaDist>) {
          if (u == 1.0) return detail::quantile_unbounded_one(spec);
          return f.scale * gamma_unit_quantile(f.shape, u, 1.0 - u);
        } else if constexpr (std::is_same_v<T, BernoulliDist>) {
          return u < 1.0 - f.p ? 0.0 : 1.0;
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          if (f.sd == 0.0) return f.mean;
          if (u == 0.0) throw std::domain_error("quantile: u=0 on support unbounded below");
          if (u == 1.0) return detail::quantile_unbounded_one(spec);
          return f.mean + f.sd * normal_quantile(u);
        } else if constexpr (std::is_same_v<T, CdfTable>) {
          if (u < f.g.front()) return f.t.front();
          // last index with g[i] <= u; the flat-stretch sup convention
          auto it = std::upper_bound(f.g.begin(), f.g.end(), u);
          std::size_t i = static_cast<std::size_t>(it - f.g.begin());
          if (i >= f.g.size()) return f.t.back();
          --i;  // g[i] <= u < g[i+1]
          double w = (u - f.g[i]) / (f.g[i + 1] - f.g[i]);
          return f.t[i] + w * (f.t[i + 1] - f.t[i]);
        } else {  // MixtureDist: monotone bisection between component quantiles
          if (u == 0.0) return spec.support.lo;
          if (u == 1.0) {
            double qb = std::isfinite(spec.support.hi) ? spec.support.hi
                                                       : detail::quantile_unbounded_one(spec);
            return qb;
          }
          double qb = quantile(*f.base, u), qt = quantile(*f.tilt, u);
          double lo = std::min(qb, qt), hi = std::max(qb, qt);
          if (hi - lo <= 0.0) return lo;
          for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(hi)); ++it) {
            double mid = 0.5 * (lo + hi);
            (cdf(spec, mid) <= u ? lo : hi) = mid;
          }
          return 0.5 * (lo + hi);
        }
      },
      spec.family);
}

// 1 - G(x), computed in the tail without cancellation where a stable form
// exists
inline double survival(const DistributionSpec& spec, double x) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Exponential>) {
          return x <= 0.0 ? 1.0 : std::exp(-f.rate * x);
        } else if constexpr (std::is_same_v<T, GammaDist>) {
          return x <= 0.0 ? 1.0 : boost::math::gamma_q(f.shape, x / f.scale);
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          if (f.sd == 0.0) return x < f.mean ? 1.0 : 0.0;
          return normal_cdf_c((x - f.mean) / f.sd);
        } else if constexpr (std::is_same_v<T, MixtureDist>) {
          return (1.0 - f.weight) * survival(*f.base, x) + f.weight * survival(*f.tilt, x);
        } else {
          return 1.0 - cdf(spec, x);
        }
      },
      spec.family);
}

// mass lost to the configured truncation horizon (0 when not truncated)
inline double truncated_mass(const DistributionSpec& spec) {
  if (!spec.truncate_at) return 0.0;
  return survival(spec, *spec.truncate_at);
}

// E[ exp(s |X - mean|) ], closed form per family; +inf when divergent.
// Used by the sub-exponential parameter search (the `m` bisection).
inline double exp_abs_moment(const DistributionSpec& spec, double s) {
  if (s < 0.0) throw std::domain_error("exp_abs_moment: s must be nonnegative");
  const double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Uniform01>) {
          return s == 0.0 ? 1.0 : 2.0 * std::expm1(0.5 * s) / s;
        } else if constexpr (std::is_same_v<T, BernoulliDist>) {
          return f.p * std::exp(s * (1.0 - f.p)) + (1.0 - f.p) * std::exp(s * f.p);
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          if (f.sd == 0.0) return 1.0;
          return 2.0 * std::exp(0.5 * s * s * f.sd * f.sd) * normal_cdf(s * f.sd);
        } else if constexpr (std::is_same_v<T, Exponential>) {
          return exp_abs_moment(gamma_dist(1.0, 1.0 / f.rate), s);
        } else if constexpr (std::is_same_v<T, GammaDist>) {
          // split at the mean mu = k*theta:
          //   E e^{-s X} 1{X<=mu} = (1+s t)^{-k} P(k, mu(1+s t)/t)
          //   E e^{ s X} 1{X> mu} = (1-s t)^{-k} Q(k, mu(1-s t)/t),  s < 1/t
          if (s * f.scale >= 1.0) return inf;
          double k = f.shape, th = f.scale, mu = k * th;
          double lower = std::pow(1.0 + s * th, -k) * boost::math::gamma_p(k, mu * (1.0 + s * th) / th);
          double upper = std::pow(1.0 - s * th, -k) * boost::math::gamma_q(k, mu * (1.0 - s * th) / th);
          return std::exp(s * mu) * lower + std::exp(-s * mu) * upper;
        } else if constexpr (std::is_same_v<T, CdfTable>) {
          // density is piecewise constant; integrate e^{s|x-mu|} segment by
          // segment in closed form, plus the possible atom at t_0
          double mu = spec.mean;
          auto seg = [&](double a, double b) -> double {
            if (s == 0.0) return b - a;
            auto prim = [&](double x) {
              return x >= mu ? std::exp(s * (x - mu)) / s : -std::exp(s * (mu - x)) / s;
            };
            if (a >= mu || b <= mu) return prim(b) - prim(a);
            return (prim(mu) - prim(a)) + (prim(b) - prim(mu)) + 2.0 / s;
          };
          double total = f.g.front() * std::exp(s * std::abs(f.t.front() - mu));
          for (std::size_t i = 0; i + 1 < f.t.size(); ++i) {
            double dg = f.g[i + 1] - f.g[i];
            if (dg > 0.0) total += dg / (f.t[i + 1] - f.t[i]) * seg(f.t[i], f.t[i + 1]);
          }
          return total;
        } else {
          throw std::invalid_argument("exp_abs_moment: unsupported family");
        }
      },
      spec.family);
}

// ---------------------------------------------------------------------------
// empirical distribution functions

class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw std::invalid_argument("EmpiricalCdf: empty sample");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double at(double t) const {
    auto it = std::upper_bound(sorted_.begin(), sorted_.end(), t);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  double left_limit(double t) const {
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), t);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  std::size_t n() const { return sorted_.size(); }
  const std::vector<double>& sorted_samples() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

inline EmpiricalCdf empirical_cdf(std::vector<double> samples) {
  return EmpiricalCdf(std::move(samples));
}

// sup |F_n - G| for an empirical cdf against a spec; exact, attained at a
// jump point or its left side (plus the spec's own jump points).
inline double sup_cdf_distance(const EmpiricalCdf& fn, const DistributionSpec& g) {
  double best = 0.0;
  for (double x : fn.sorted_samples()) {
    best = std::max(best, std::abs(fn.at(x) - cdf(g, x)));
    best = std::max(best, std::abs(fn.left_limit(x) - cdf_left(g, x)));
  }
  if (std::holds_alternative<BernoulliDist>(g.family)) {
    for (double x : {0.0, 1.0}) {
      best = std::max(best, std::abs(fn.at(x) - cdf(g, x)));
      best = std::max(best, std::abs(fn.left_limit(x) - cdf_left(g, x)));
    }
  }
  return best;
}

inline double sup_cdf_distance(const EmpiricalCdf& a, const EmpiricalCdf& b) {
  double best = 0.0;
  auto probe = [&](double x) {
    best = std::max(best, std::abs(a.at(x) - b.at(x)));
    best = std::max(best, std::abs(a.left_limit(x) - b.left_limit(x)));
  };
  for (double x : a.sorted_samples()) probe(x);
  for (double x : b.sorted_samples()) probe(x);
  return best;
}

// sup |A - B| between two specs, probed at family knots/atoms plus a dense
// quantile-spaced grid; resolution-limited for continuous pairs.
inline double sup_cdf_distance(const DistributionSpec& a, const DistributionSpec& b,
                               int grid_cells = 1 << 14) {
  std::vector<double> probes;
  auto add_knots = [&](const DistributionSpec& s) {
    if (const auto* tb = std::get_if<CdfTable>(&s.family))
      probes.insert(probes.end(), tb->t.begin(), tb->t.end());
    if (std::holds_alternative<BernoulliDist>(s.family)) {
      probes.push_back(0.0);
      probes.push_back(1.0);
    }
    if (const auto* gd = std::get_if<GaussianDist>(&s.family); gd && gd->sd == 0.0)
      probes.push_back(gd->mean);
  };
  add_knots(a);
  add_knots(b);
  double lo = std::min(a.support.lo, b.support.lo);
  double hi = std::max(a.support.hi, b.support.hi);
  if (!std::isfinite(lo)) lo = std::min(quantile(a, 1e-12), quantile(b, 1e-12));
  if (!std::isfinite(hi)) {
    auto tail = [&](const DistributionSpec& s) {
      if (std::isfinite(s.support.hi)) return s.support.hi;
      return s.truncate_at ? *s.truncate_at : quantile(s, 1.0 - 1e-12);
    };
    hi = std::max(tail(a), tail(b));
  }
  for (int i = 0; i <= grid_cells; ++i)
    probes.push_back(lo + (hi - lo) * static_cast<double>(i) / grid_cells);
  double best = 0.0;
  for (double x : probes) {
    best = std::max(best, std::abs(cdf(a, x) - cdf(b, x)));
    best = std::max(best, std::abs(cdf_left(a, x) - cdf_left(b, x)));
  }
  return best;
}

// CSV rows "t,G(t)" (strictly increasing t); header line optional.
inline DistributionSpec load_cdf_table(std::istream& in) {
  std::vector<double> ts, gs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double t, g;
    if (ls >> t >> g) {
      ts.push_back(t);
      gs.push_back(g);
    }
  }
  return cdf_table(std::move(ts), std::move(gs));
}

}  // namespace transq
