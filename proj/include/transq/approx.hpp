#pragma once

// Diffusion approximants, built from the same driving Brownian objects as
// the coupled sample and evaluated on a shared grid:
//
//   H_n(t)  = n p (G(t) [+ r_n]) + sqrt(n) ( p B^{br,n}_{G(t)}
//                                            + sqrt(p(1-p)) \hat B_{G(t)} )
//   R_n(t)  = sqrt(n) sigma B_{p G(t)} + mu H_n(t)
//   E~_n(t) = p (G(t) [+ r_n]) - c_n t / (n mu)
//   E_n(t)  = c_n t / (n mu) + inf_{s<=t} E~_n(s)
//   X_n(t)  = H_n(t) - c_n t / mu + sqrt(n) (sigma/mu) B_{E_n(t)}
//   Y^_n(t) = (H^_n(t) - c_n t / (sqrt(n) mu)) + (sigma/mu) B_{E_n(t)}
//
// with H^_n = H_n / sqrt(n) and the bracketed r_n shift only on the
// varying-law arrival branch. The queue-length approximant is the
// reflection phi of X_n (or Y^_n on the diffusion scale).

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "transq/brownian.hpp"
#include "transq/distributions.hpp"
#include "transq/grid_path.hpp"
#include "transq/kmt.hpp"

namespace transq {

struct ApproxParams {
  long long n = 1;
  double p = 1.0;
  double mu = 1.0;
  double sigma = 0.0;
  double cn = 1.0;
  AssumptionBranch branch = AssumptionBranch::Stationary;
  double rn = 0.0;  // sup |G^{(n)} - G|; ignored on the stationary branch
};

namespace detail {
inline double branch_shift(const ApproxParams& pr) {
  return pr.branch == AssumptionBranch::VaryingLaw ? pr.rn : 0.0;
}
}  // namespace detail

inline GridPath build_H(BrownianBridge& bridge, RefinableBrownianPath& bm_hat,
                        const DistributionSpec& G, const ApproxParams& pr,
                        std::span<const double> grid) {
  double rn = detail::branch_shift(pr);
  double root_n = std::sqrt(static_cast<double>(pr.n));
  double q = std::sqrt(pr.p * (1.0 - pr.p));
  std::vector<double> ks(grid.begin(), grid.end()), vs(grid.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double g = cdf(G, ks[i]);
    vs[i] = static_cast<double>(pr.n) * pr.p * (g + rn) +
            root_n * (pr.p * bridge.at(g) + q * bm_hat.at(g));
  }
  return GridPath(std::move(ks), std::move(vs), PathMode::Linear);
}

inline GridPath build_R(const GridPath& H, RefinableBrownianPath& bm, const DistributionSpec& G,
                        const ApproxParams& pr) {
  double root_n = std::sqrt(static_cast<double>(pr.n));
  std::vector<double> vs(H.size());
  for (std::size_t i = 0; i < vs.size(); ++i)
    vs[i] = root_n * pr.sigma * bm.at(pr.p * cdf(G, H.knots()[i])) + pr.mu * H.values()[i];
  return GridPath(H.knots(), std::move(vs), PathMode::Linear, H.domain_end());
}

inline GridPath build_Etilde(const DistributionSpec& G, const ApproxParams& pr,
                             std::span<const double> grid) {
  double rn = detail::branch_shift(pr);
  double drift = pr.cn / (static_cast<double>(pr.n) * pr.mu);
  std::vector<double> ks(grid.begin(), grid.end()), vs(grid.size());
  for (std::size_t i = 0; i < ks.size(); ++i)
    vs[i] = pr.p * (cdf(G, ks[i]) + rn) - drift * ks[i];
  return GridPath(std::move(ks), std::move(vs), PathMode::Linear);
}

// E_n >= 0 always (take s = t in the infimum); tiny negative float residue
// is clamped, anything beyond tolerance is an invariant violation.
inline GridPath build_E(const GridPath& Etilde, const ApproxParams& pr) {
  GridPath inf = running_infimum(Etilde);
  double drift = pr.cn / (static_cast<double>(pr.n) * pr.mu);
  std::vector<double> vs(inf.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    vs[i] = drift * inf.knots()[i] + inf.values()[i];
    if (vs[i] < 0.0) {
      if (vs[i] < -1e-9) throw std::runtime_error("build_E: negative time change");
      vs[i] = 0.0;
    }
  }
  return GridPath(inf.knots(), std::move(vs), PathMode::Linear, inf.domain_end());
}

inline GridPath build_X(const GridPath& H, RefinableBrownianPath& bm, const GridPath& E,
                        const ApproxParams& pr) {
  double root_n = std::sqrt(static_cast<double>(pr.n));
  std::vector<double> vs(H.size());
  for (std::size_t i = 0; i < vs.size(); ++i)
    vs[i] = H.values()[i] - pr.cn * H.knots()[i] / pr.mu +
            root_n * (pr.sigma / pr.mu) * bm.at(E.values()[i]);
  return GridPath(H.knots(), std::move(vs), PathMode::Linear, H.domain_end());
}

inline GridPath build_Yhat(const GridPath& Hhat, RefinableBrownianPath& bm, const GridPath& E,
                           const ApproxParams& pr) {
  double root_n = std::sqrt(static_cast<double>(pr.n));
  std::vector<double> vs(Hhat.size());
  for (std::size_t i = 0; i < vs.size(); ++i)
    vs[i] = Hhat.values()[i] - pr.cn * Hhat.knots()[i] / (root_n * pr.mu) +
            (pr.sigma / pr.mu) * bm.at(E.values()[i]);
  return GridPath(Hhat.knots(), std::move(vs), PathMode::Linear, Hhat.domain_end());
}

inline GridPath approx_queue_length(const GridPath& pre_reflection) { return reflect(pre_reflection); }

struct ApproximantSet {
  std::vector<double> grid;
  GridPath H, Hhat;       // arrival approximant and its diffusion scaling
  GridPath R;             // workload approximant
  GridPath Etilde, E;     // time change for the queue-length motion
  GridPath X, Yhat;       // queue-length pre-reflection, two normalizations
  AssumptionBranch branch = AssumptionBranch::Stationary;
  // drivers consumed, for identity checks against the sample
  const RefinableBrownianPath* bridge_driver = nullptr;
  const RefinableBrownianPath* dropout_driver = nullptr;
  const RefinableBrownianPath* service_driver = nullptr;
};

// Builds every approximant from the sample's own drivers on `grid`; the
// grid should contain the arrival/completion epochs plus a delta-grid over
// [0, horizon] so step-vs-continuous sup distances probe the right points.
inline ApproximantSet build_approximants(CoupledSample& sample, double cn,
                                         std::span<const double> grid) {
  ApproxParams pr{sample.n,  sample.p, sample.service.mean, sample.service.sd,
                  cn,        sample.branch, sample.rn};
  ApproximantSet out;
  out.grid.assign(grid.begin(), grid.end());
  out.branch = sample.branch;
  out.bridge_driver = &sample.bridge_motion;
  out.dropout_driver = &sample.bm_dropout;
  out.service_driver = &sample.bm_service;

  BrownianBridge br = sample.bridge();
  out.H = build_H(br, sample.bm_dropout, sample.arrival_limit, pr, grid);
  double root_n = std::sqrt(static_cast<double>(pr.n));
  std::vector<double> hhat(out.H.values());
  for (double& v : hhat) v /= root_n;
  out.Hhat = GridPath(out.H.knots(), std::move(hhat), PathMode::Linear, out.H.domain_end());
  out.R = build_R(out.H, sample.bm_service, sample.arrival_limit, pr);
  out.Etilde = build_Etilde(sample.arrival_limit, pr, grid);
  out.E = build_E(out.Etilde, pr);
  out.X = build_X(out.H, sample.bm_service, out.E, pr);
  out.Yhat = build_Yhat(out.Hhat, sample.bm_service, out.E, pr);
  return out;
}

}  // namespace transq
