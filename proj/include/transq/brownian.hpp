#pragma once

// Lazily refinable Brownian paths.
//
// A RefinableBrownianPath starts from Gaussian increments on a coarse grid
// and fills in unseen times on demand from the Brownian-bridge conditional
// law given the two neighboring cached knots (free extension past the last
// knot). Queries are cached, so a repeated query returns the identical
// value and a fixed seed plus a fixed query sequence replays bit-identical
// paths. Queries below the smallest cached positive knot condition on the
// pinned value at 0.
//
// The bridge view turns a unit-horizon motion into the bridge
// t -> B(t) - t*B(1); its local conditional refinement law coincides with
// the motion's, so the view stays refinable.

#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "transq/grid_path.hpp"
#include "transq/rng.hpp"

namespace transq {

class RefinableBrownianPath {
 public:
  // Gaussian increments on initial_grid equally spaced knots over
  // [0, horizon]; B(0) = 0; variance rate `scale`.
  RefinableBrownianPath(double horizon, int initial_grid, RngStream rng, double scale = 1.0)
      : rng_(std::move(rng)), scale_(scale), horizon_(horizon) {
    if (!(horizon > 0.0)) throw std::invalid_argument("RefinableBrownianPath: horizon must be positive");
    if (initial_grid < 2) throw std::invalid_argument("RefinableBrownianPath: need at least 2 grid knots");
    if (!(scale > 0.0)) throw std::invalid_argument("RefinableBrownianPath: scale must be positive");
    double h = horizon / (initial_grid - 1);
    double v = 0.0;
    cache_[0.0] = 0.0;
    for (int i = 1; i < initial_grid; ++i) {
      v += std::sqrt(scale_ * h) * rng_.normal();
      cache_[i == initial_grid - 1 ? horizon : i * h] = v;
    }
  }

  // Path value at t >= 0, refining the cache if t is unseen.
  double at(double t) {
    if (t < 0.0) throw std::domain_error("RefinableBrownianPath: negative time");
    auto it = cache_.lower_bound(t);
    if (it != cache_.end() && it->first == t) return it->second;
    double val;
    if (it == cache_.end()) {
      // beyond the largest knot: free Brownian extension
      auto last = std::prev(it);
      val = last->second + std::sqrt(scale_ * (t - last->first)) * rng_.normal();
    } else {
      auto right = it;
      auto left = std::prev(it);  // exists: 0 is always cached and t > 0 here
      double l = left->first, r = right->first;
      double w = (t - l) / (r - l);
      double mean = left->second + w * (right->second - left->second);
      double var = scale_ * (t - l) * (r - t) / (r - l);
      val = mean + std::sqrt(var) * rng_.normal();
    }
    cache_.emplace(t, val);
    return val;
  }

  double horizon() const { return horizon_; }
  double scale() const { return scale_; }
  std::size_t cached_knots() const { return cache_.size(); }

  // Immutable snapshot of the cached knots (linear interpolation); safe to
  // share across workers, unlike the refinable path itself.
  GridPath to_grid_path() const {
    std::vector<double> ks, vs;
    ks.reserve(cache_.size());
    vs.reserve(cache_.size());
    for (const auto& [k, v] : cache_) {
      ks.push_back(k);
      vs.push_back(v);
    }
    return GridPath(std::move(ks), std::move(vs), PathMode::Linear);
  }

 private:
  std::map<double, double> cache_;
  RngStream rng_;
  double scale_;
  double horizon_;
};

inline RefinableBrownianPath sample_bm(double horizon, int initial_grid, RngStream rng,
                                       double scale = 1.0) {
  return RefinableBrownianPath(horizon, initial_grid, std::move(rng), scale);
}

// View of B(t) - t*B(1) over a unit-horizon motion; vanishes at 0 and 1.
// Non-owning: the underlying motion must outlive the view and stays confined
// to one worker while refinable.
class BrownianBridge {
 public:
  explicit BrownianBridge(RefinableBrownianPath& bm) : bm_(&bm) {
    if (bm.horizon() != 1.0)
      throw std::invalid_argument("BrownianBridge: underlying motion must live on [0,1]");
    end_value_ = bm.at(1.0);
  }

  double at(double t) {
    if (t < 0.0 || t > 1.0) throw std::domain_error("BrownianBridge: time outside [0,1]");
    return bm_->at(t) - t * end_value_;
  }

  RefinableBrownianPath& motion() { return *bm_; }

 private:
  RefinableBrownianPath* bm_;
  double end_value_;
};

inline BrownianBridge bridge_from_bm(RefinableBrownianPath& bm) { return BrownianBridge(bm); }

// Standard Brownian bridge on all dyadic points k/2^levels, endpoints pinned
// to 0, built by midpoint conditioning level by level (left to right within
// a level). The midpoint of a width-w cell has conditional sd sqrt(w)/2, so
// the level-j normals are recoverable exactly from the output values.
inline GridPath sample_bridge_dyadic(int levels, RngStream rng) {
  if (levels < 1) throw std::invalid_argument("sample_bridge_dyadic: levels must be >= 1");
  if (levels > 24) throw std::length_error("sample_bridge_dyadic: level exceeds memory budget");
  std::size_t m = (std::size_t{1} << levels) + 1;
  std::vector<double> vals(m, 0.0);
  for (int j = 0; j < levels; ++j) {
    std::size_t stride = std::size_t{1} << (levels - j);  // knots per cell at this level
    double half_sd = 0.5 * std::sqrt(std::ldexp(1.0, -j));
    for (std::size_t a = 0; a + stride < m; a += stride) {
      std::size_t mid = a + stride / 2;
      vals[mid] = 0.5 * (vals[a] + vals[a + stride]) + half_sd * rng.normal();
    }
  }
  std::vector<double> ks(m);
  for (std::size_t i = 0; i < m; ++i) ks[i] = std::ldexp(static_cast<double>(i), -levels);
  return GridPath(std::move(ks), std::move(vals), PathMode::Linear);
}

// Path t -> p(tau(t)) on tau's knots, refining p at unseen times. tau need
// not be monotone; negative tau values are a domain error.
template <class RefinablePath>
GridPath time_change(RefinablePath& p, const GridPath& tau) {
  std::vector<double> vals(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) {
    double s = tau.values()[i];
    if (s < 0.0) throw std::domain_error("time_change: negative time argument");
    vals[i] = p.at(s);
  }
  return GridPath(tau.knots(), std::move(vals), tau.mode(), tau.domain_end());
}

}  // namespace transq
