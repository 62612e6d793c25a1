#pragma once

// Strong-embedding constructions.
//
// uniforms_from_bridge builds n iid uniforms from a Brownian bridge by the
// dyadic scheme: the bridge normal of a cell splits the cell count through
// the Bin(m, 1/2) quantile H_m, recursively, until a cell holds at most one
// point (or J_max is reached); terminal points are placed iid uniform within
// their cell and the order statistics are randomly permuted.
//
// walk_from_bm builds iid increments from a Brownian motion: the top block
// sum is the quantile transform of Phi(B_n/sqrt(n)) under the n-fold
// convolution law, and each dyadic split draws the half-block sum from the
// family's conditional-given-sum law (Gaussian splits are Gaussian,
// Bernoulli splits hypergeometric, Gamma splits scaled Beta), driven through
// Phi by the standardized bridge normal of the block.
//
// build_coupled_sample assembles one replication: arrival epochs through the
// generalized inverse of G (or G^{(n)}), dropout marks from a Bernoulli walk
// over an independent motion, services from the service-family walk over a
// third motion. The three drivers are the processes every approximant is
// built from.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "transq/brownian.hpp"
#include "transq/distributions.hpp"
#include "transq/rng.hpp"
#include "transq/special.hpp"

namespace transq {

struct unsupported_family_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// discrete quantiles

// smallest k with Bin(n,p)-cdf(k) >= u; uc = 1-u carried separately so both
// tails keep full precision
inline long long binomial_quantile(long long n, double p, double u, double uc) {
  if (n < 0) throw std::domain_error("binomial_quantile: negative n");
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
  long long lo = 0, hi = n;
  while (lo < hi) {
    long long mid = lo + (hi - lo) / 2;
    bool geq = u <= 0.5
                   ? boost::math::cdf(dist, static_cast<double>(mid)) >= u
                   : boost::math::cdf(boost::math::complement(dist, static_cast<double>(mid))) <= uc;
    if (geq)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

// H_m: inverse distribution function of Bin(m, 1/2), H_0 = 0.
inline long long binom_half_quantile(long long m, double u) {
  if (m < 0) throw std::domain_error("binom_half_quantile: negative m");
  if (m == 0) return 0;
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("binom_half_quantile: u must lie in (0,1)");
  return binomial_quantile(m, 0.5, u, 1.0 - u);
}

inline double log_choose(long long n, long long k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// smallest k with Hypergeometric(population, successes, draws)-cdf(k) >= u.
// Sums the pmf from whichever tail is nearer so extreme u stay exact.
inline long long hypergeometric_quantile(long long population, long long successes, long long draws,
                                         double u, double uc) {
  if (population < 0 || successes < 0 || draws < 0 || successes > population || draws > population)
    throw std::domain_error("hypergeometric_quantile: invalid parameters");
  long long xlo = std::max(0LL, successes + draws - population);
  long long xhi = std::min(draws, successes);
  if (xlo >= xhi) return xlo;
  double lden = log_choose(population, draws);
  auto lpmf = [&](long long x) {
    return log_choose(successes, x) + log_choose(population - successes, draws - x) - lden;
  };
  double acc = 0.0, comp = 0.0;  // Kahan
  auto add = [&](double term) {
    double y = term - comp;
    double t = acc + y;
    comp = (t - acc) - y;
    acc = t;
  };
  if (u <= 0.5) {
    for (long long x = xlo; x < xhi; ++x) {
      add(std::exp(lpmf(x)));
      if (acc >= u) return x;
    }
    return xhi;
  }
  // largest j with P(X >= j) > uc equals the quantile
  for (long long x = xhi; x > xlo; --x) {
    add(std::exp(lpmf(x)));
    if (acc > uc) return x;
  }
  return xlo;
}

// ---------------------------------------------------------------------------
// iid uniforms from a Brownian bridge

struct DyadicCell {
  int level;            // j >= 1; cell [index/2^j, (index+1)/2^j)
  std::uint64_t index;
  long long count;      // N_i
  bool split;
};

struct DyadicCounts {
  long long total = 0;
  std::vector<DyadicCell> cells;

  int deepest() const {
    int d = 0;
    for (const auto& c : cells) d = std::max(d, c.level);
    return d;
  }

  // Cross-section mass at a level: cells at that level plus terminal cells
  // above it. Equals `total` for every level up to deepest().
  long long level_sum(int level) const {
    long long s = 0;
    for (const auto& c : cells) {
      if (c.level == level) s += c.count;
      else if (c.level < level && !c.split) s += c.count;
    }
    return s;
  }
};

struct UniformSample {
  std::vector<double> uniforms;   // iid U(0,1): randomly permuted order statistics
  std::vector<std::size_t> rank;  // uniforms[j] is the rank[j]-th order statistic (0-based)
  DyadicCounts counts;
  int jmax_truncations = 0;       // cells cut off at J_max while still holding > 1 point
};

inline UniformSample uniforms_from_bridge(long long n, BrownianBridge& bridge, RngStream& aux,
                                          int j_max = 40) {
  if (n < 1) throw std::invalid_argument("uniforms_from_bridge: n must be >= 1");
  if (j_max < 1) throw std::invalid_argument("uniforms_from_bridge: j_max must be >= 1");
  UniformSample out;
  out.counts.total = n;
  out.uniforms.reserve(static_cast<std::size_t>(n));

  struct Node {
    int j;
    std::uint64_t k;
    long long cnt;
  };
  std::vector<Node> stack;
  stack.push_back({0, 0, n});  // root cell [0,1)
  while (!stack.empty()) {
    Node c = stack.back();
    stack.pop_back();
    if (c.cnt <= 0) {
      if (c.j >= 1) out.counts.cells.push_back({c.j, c.k, c.cnt, false});
      continue;
    }
    double width = std::ldexp(1.0, -c.j);
    double left = static_cast<double>(c.k) * width;
    if (c.cnt == 1 || c.j >= j_max) {
      if (c.j >= 1) out.counts.cells.push_back({c.j, c.k, c.cnt, false});
      if (c.cnt > 1) ++out.jmax_truncations;
      for (long long i = 0; i < c.cnt; ++i) out.uniforms.push_back(left + width * aux.u01());
      continue;
    }
    // Z_i = 2^{j/2} (2 B(mid) - B(left) - B(right)); at the root this is 2B(1/2)
    double mid = left + 0.5 * width;
    double z = std::exp2(0.5 * c.j) *
               (2.0 * bridge.at(mid) - bridge.at(left) - bridge.at(left + width));
    long long first = binomial_quantile(c.cnt, 0.5, normal_cdf(z), normal_cdf_c(z));
    if (c.j >= 1) out.counts.cells.push_back({c.j, c.k, c.cnt, true});
    // right child pushed first so the left subtree is refined first
    stack.push_back({c.j + 1, 2 * c.k + 1, c.cnt - first});
    stack.push_back({c.j + 1, 2 * c.k, first});
  }

  std::sort(out.uniforms.begin(), out.uniforms.end());
  out.rank.resize(static_cast<std::size_t>(n));
  std::iota(out.rank.begin(), out.rank.end(), std::size_t{0});
  aux.shuffle(out.rank.begin(), out.rank.end());
  std::vector<double> permuted(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < permuted.size(); ++j) permuted[j] = out.uniforms[out.rank[j]];
  out.uniforms = std::move(permuted);
  return out;
}

// ---------------------------------------------------------------------------
// iid increments from a Brownian motion

struct WalkFamily {
  enum class Kind { Gaussian, Bernoulli, Gamma };
  Kind kind;
  double a = 0.0;  // gaussian mean / bernoulli p / gamma shape
  double b = 0.0;  // gaussian sd / gamma scale

  static WalkFamily gaussian(double mean, double sd) {
    if (sd < 0.0) throw std::invalid_argument("WalkFamily: sd must be nonnegative");
    return {Kind::Gaussian, mean, sd};
  }
  static WalkFamily bernoulli(double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("WalkFamily: p outside [0,1]");
    return {Kind::Bernoulli, p, 0.0};
  }
  static WalkFamily gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw std::invalid_argument("WalkFamily: gamma shape/scale must be positive");
    return {Kind::Gamma, shape, scale};
  }
};

// Families with a tractable dyadic conditional law; everything else is
// rejected.
inline WalkFamily walk_family_from(const DistributionSpec& spec) {
  if (const auto* g = std::get_if<GaussianDist>(&spec.family)) return WalkFamily::gaussian(g->mean, g->sd);
  if (const auto* b = std::get_if<BernoulliDist>(&spec.family)) return WalkFamily::bernoulli(b->p);
  if (const auto* g = std::get_if<GammaDist>(&spec.family)) return WalkFamily::gamma(g->shape, g->scale);
  if (const auto* e = std::get_if<Exponential>(&spec.family)) return WalkFamily::gamma(1.0, 1.0 / e->rate);
  throw unsupported_family_error("walk_from_bm: family lacks a tractable dyadic conditional law");
}

namespace detail {

struct WalkBuilder {
  RefinableBrownianPath& bm;
  const WalkFamily& fam;
  double time_scale;       // B~_k = sqrt(time_scale) * bm(k / time_scale)
  std::vector<double>& x;

  double wtilde(double k) const { return std::sqrt(time_scale) * bm.at(k / time_scale); }

  void split(std::size_t offset, std::size_t len, double total) {
    if (len == 1) {
      x[offset] = total;
      return;
    }
    std::size_t m = len / 2;
    double o = static_cast<double>(offset);
    double vt = (2.0 * wtilde(o + static_cast<double>(m)) - wtilde(o) -
                 wtilde(o + static_cast<double>(len))) /
                std::sqrt(static_cast<double>(len));
    double first;
    switch (fam.kind) {
      case WalkFamily::Kind::Gaussian:
        // the transform is the identity here; using vt directly keeps the
        // coupling to the motion exact instead of ~1e-14
        first = 0.5 * total + 0.5 * fam.b * std::sqrt(static_cast<double>(len)) * vt;
        break;
      case WalkFamily::Kind::Bernoulli:
        first = static_cast<double>(hypergeometric_quantile(
            static_cast<long long>(len), static_cast<long long>(std::llround(total)),
            static_cast<long long>(m), normal_cdf(vt), normal_cdf_c(vt)));
        break;
      case WalkFamily::Kind::Gamma:
        first = total * beta_quantile(static_cast<double>(m) * fam.a,
                                      static_cast<double>(m) * fam.a, normal_cdf(vt),
                                      normal_cdf_c(vt));
        break;
      default:
        throw unsupported_family_error("walk_from_bm: unsupported family");
    }
    split(offset, m, first);
    split(offset + m, len - m, total - first);
  }
};

}  // namespace detail

// n must be a power of two. time_scale sets the coupling clock: the walk is
// driven by B~_k = sqrt(time_scale) * bm(k/time_scale), so partial sums track
// mu*k + sigma*B~_k. Defaults to n; the coupled sample passes the real
// population size when padding to the next power of two.
inline std::vector<double> walk_from_bm(std::size_t n, RefinableBrownianPath& bm,
                                        const WalkFamily& fam, double time_scale = 0.0) {
  if (n == 0 || !std::has_single_bit(n))
    throw std::invalid_argument("walk_from_bm: n must be a power of two");
  double ts = time_scale > 0.0 ? time_scale : static_cast<double>(n);
  std::vector<double> x(n);
  detail::WalkBuilder builder{bm, fam, ts, x};
  double z_top = builder.wtilde(static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
  double total;
  switch (fam.kind) {
    case WalkFamily::Kind::Gaussian:
      total = static_cast<double>(n) * fam.a + fam.b * std::sqrt(static_cast<double>(n)) * z_top;
      break;
    case WalkFamily::Kind::Bernoulli:
      total = static_cast<double>(binomial_quantile(static_cast<long long>(n), fam.a,
                                                    normal_cdf(z_top), normal_cdf_c(z_top)));
      break;
    case WalkFamily::Kind::Gamma:
      total = fam.b * gamma_unit_quantile(static_cast<double>(n) * fam.a, normal_cdf(z_top),
                                          normal_cdf_c(z_top));
      break;
    default:
      throw unsupported_family_error("walk_from_bm: unsupported family");
  }
  builder.split(0, n, total);
  return x;
}

// ---------------------------------------------------------------------------
// the jointly coupled sample

enum class AssumptionBranch { Stationary, VaryingLaw };  // Assumption 2.1 / 2.4 style arrivals

struct CoupledSampleConfig {
  long long n = 1;
  double p = 1.0;
  DistributionSpec arrival_limit;                 // G
  std::optional<DistributionSpec> arrival_tilt;   // mixture component for the varying-law branch
  double mixture_coeff = 0.0;                     // a in (1 - a/sqrt(n)) G + (a/sqrt(n)) Gt
  AssumptionBranch branch = AssumptionBranch::Stationary;
  DistributionSpec service;
  StreamFactory streams;
  int j_max = 40;
};

struct CoupledSample {
  long long n = 0;
  double p = 1.0;
  AssumptionBranch branch = AssumptionBranch::Stationary;
  DistributionSpec arrival_limit;  // G
  DistributionSpec arrival_law;    // law the T_i are drawn from (G^{(n)} or G)
  double rn = 0.0;                 // sup |G^{(n)} - G|, 0 on the stationary branch
  DistributionSpec service;
  std::vector<double> arrival_epochs;  // T_i, customer order
  std::vector<int> dropout;            // zeta_i, paired with T_i before sorting
  std::vector<double> services;        // V_k, consumed in acceptance order
  RefinableBrownianPath bridge_motion; // B^{br,n} is the bridge view over this
  RefinableBrownianPath bm_dropout;    // \hat B
  RefinableBrownianPath bm_service;    // B
  UniformSample uniforms;

  BrownianBridge bridge() { return BrownianBridge(bridge_motion); }

  void write_csv(std::ostream& os) const {
    os << "i,T_i,zeta_i,V_i\n";
    for (std::size_t i = 0; i < arrival_epochs.size(); ++i)
      os << (i + 1) << ',' << arrival_epochs[i] << ',' << dropout[i] << ',' << services[i] << '\n';
  }
};

inline CoupledSample build_coupled_sample(const CoupledSampleConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("build_coupled_sample: n must be >= 1");
  if (!(cfg.p > 0.0 && cfg.p <= 1.0))
    throw std::invalid_argument("build_coupled_sample: p must lie in (0,1]");
  if (cfg.branch == AssumptionBranch::VaryingLaw && !cfg.arrival_tilt)
    throw std::invalid_argument("build_coupled_sample: varying-law branch needs a mixture component");

  CoupledSample s{
      cfg.n,
      cfg.p,
      cfg.branch,
      cfg.arrival_limit,
      cfg.arrival_limit,
      0.0,
      cfg.service,
      {},
      {},
      {},
      RefinableBrownianPath(1.0, 2, cfg.streams.make(StreamRole::Bridge)),
      RefinableBrownianPath(1.0, 2, cfg.streams.make(StreamRole::DropoutWalk)),
      RefinableBrownianPath(1.0, 2, cfg.streams.make(StreamRole::ServiceWalk)),
      {}};
  if (cfg.branch == AssumptionBranch::VaryingLaw) {
    s.arrival_law = mixture_gn(cfg.arrival_limit, *cfg.arrival_tilt, cfg.mixture_coeff, cfg.n);
    double w = cfg.mixture_coeff / std::sqrt(static_cast<double>(cfg.n));
    s.rn = w == 0.0 ? 0.0 : w * sup_cdf_distance(*cfg.arrival_tilt, cfg.arrival_limit);
  }

  // uniforms first: the dyadic recursion must see pristine cell endpoints
  BrownianBridge br(s.bridge_motion);
  RngStream aux = cfg.streams.make(StreamRole::CellPlacement);
  s.uniforms = uniforms_from_bridge(cfg.n, br, aux, cfg.j_max);

  s.arrival_epochs.resize(static_cast<std::size_t>(cfg.n));
  for (std::size_t j = 0; j < s.arrival_epochs.size(); ++j)
    s.arrival_epochs[j] = quantile(s.arrival_law, s.uniforms.uniforms[j]);

  std::size_t padded = std::bit_ceil(static_cast<std::size_t>(cfg.n));
  std::vector<double> zeta_walk = walk_from_bm(padded, s.bm_dropout, WalkFamily::bernoulli(cfg.p),
                                               static_cast<double>(cfg.n));
  s.dropout.resize(static_cast<std::size_t>(cfg.n));
  // zeta_i is consumed at arrival rank i, so the walk increment follows the
  // customer's rank through the permutation
  for (std::size_t j = 0; j < s.dropout.size(); ++j)
    s.dropout[j] = static_cast<int>(std::llround(zeta_walk[s.uniforms.rank[j]]));

  std::vector<double> v_walk =
      walk_from_bm(padded, s.bm_service, walk_family_from(cfg.service), static_cast<double>(cfg.n));
  s.services.assign(v_walk.begin(), v_walk.begin() + static_cast<std::ptrdiff_t>(cfg.n));
  return s;
}

}  // namespace transq
