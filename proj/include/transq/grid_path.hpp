#pragma once

// Real-valued paths on a finite knot set, plus the functional calculus the
// queueing constructions need: running infimum, Skorokhod reflection
// phi(f)(t) = f(t) - inf_{u<=t} f(u), and sup-norm distances.
//
// Two interpolation modes. Step paths are right-continuous with left limits
// (value at t is the value at the largest knot <= t). Linear paths
// interpolate between knots and extend flat past the last knot. Evaluation
// before the first knot returns the first value; paths that start at time 0
// should carry an explicit 0-knot.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace transq {

enum class PathMode { Step, Linear };

inline const char* to_string(PathMode m) { return m == PathMode::Step ? "step" : "linear"; }

class GridPath {
 public:
  GridPath() = default;

  // domain_end defaults to the last knot. Knots must be strictly increasing,
  // start at a nonnegative time, and match values in length.
  GridPath(std::vector<double> knots, std::vector<double> values, PathMode mode,
           double domain_end = std::numeric_limits<double>::quiet_NaN())
      : knots_(std::move(knots)), values_(std::move(values)), mode_(mode) {
    if (knots_.empty() || knots_.size() != values_.size())
      throw std::invalid_argument("GridPath: knots/values must be nonempty and equal length");
    if (knots_.front() < 0.0) throw std::invalid_argument("GridPath: knots must start at t >= 0");
    for (std::size_t i = 1; i < knots_.size(); ++i)
      if (!(knots_[i] > knots_[i - 1]))
        throw std::invalid_argument("GridPath: knots must be strictly increasing");
    domain_end_ = std::isnan(domain_end) ? knots_.back() : domain_end;
    if (domain_end_ < knots_.back())
      throw std::invalid_argument("GridPath: domain_end before last knot");
  }

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  PathMode mode() const { return mode_; }
  double domain_end() const { return domain_end_; }
  double start() const { return knots_.front(); }
  std::size_t size() const { return knots_.size(); }

  double at(double t) const {
    if (t <= knots_.front()) return values_.front();
    if (t >= knots_.back()) return values_.back();
    // index of largest knot <= t
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    if (mode_ == PathMode::Step) return values_[i];
    double w = (t - knots_[i]) / (knots_[i + 1] - knots_[i]);
    return values_[i] + w * (values_[i + 1] - values_[i]);
  }

  // f(t-). Linear paths are continuous; step paths return the value at the
  // largest knot strictly below t.
  double left_limit(double t) const {
    if (mode_ == PathMode::Linear) return at(t);
    if (t <= knots_.front()) return values_.front();
    auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.end()) return values_.back();
    std::size_t i = static_cast<std::size_t>(it - knots_.begin());
    return i == 0 ? values_.front() : values_[i - 1];
  }

  void write_csv(std::ostream& os) const {
    os << "t,value,mode\n";
    for (std::size_t i = 0; i < knots_.size(); ++i)
      os << knots_[i] << ',' << values_[i] << ',' << to_string(mode_) << '\n';
  }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  PathMode mode_ = PathMode::Step;
  double domain_end_ = 0.0;
};

// Pointwise running minimum on the same knot set. Knot evaluation is exact:
// linear segments attain their minimum at an endpoint, step segments are
// constant.
inline GridPath running_infimum(const GridPath& p) {
  std::vector<double> v(p.values());
  for (std::size_t i = 1; i < v.size(); ++i) v[i] = std::min(v[i], v[i - 1]);
  return GridPath(p.knots(), std::move(v), p.mode(), p.domain_end());
}

// Skorokhod reflection phi(f)(t) = f(t) - inf_{u<=t} f(u); nonnegative.
inline GridPath reflect(const GridPath& p) {
  std::vector<double> v(p.values());
  double run = v.front();
  for (std::size_t i = 0; i < v.size(); ++i) {
    run = std::min(run, v[i]);
    v[i] -= run;
  }
  return GridPath(p.knots(), std::move(v), p.mode(), p.domain_end());
}

// Candidate evaluation times for sup norms over [lo, hi]: both knot sets,
// the endpoints, and a delta-spaced grid. Jump knots are probed from both
// sides at evaluation time, so left-limit points need no extra entries.
inline std::vector<double> candidate_times(std::span<const double> a_knots,
                                           std::span<const double> b_knots, double lo, double hi,
                                           double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("candidate_times: delta must be positive");
  if (!(lo <= hi)) throw std::invalid_argument("candidate_times: empty window");
  std::vector<double> ts;
  ts.reserve(a_knots.size() + b_knots.size() + static_cast<std::size_t>((hi - lo) / delta) + 2);
  for (double t : a_knots)
    if (t >= lo && t <= hi) ts.push_back(t);
  for (double t : b_knots)
    if (t >= lo && t <= hi) ts.push_back(t);
  for (double t = lo; t < hi; t += delta) ts.push_back(t);
  ts.push_back(lo);
  ts.push_back(hi);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

// max |p1 - p2| over the union of knot sets, the left-limit side of every
// jump knot, and a delta-grid on the overlapping domain. Exact when both
// paths are step paths; otherwise a delta-resolution lower bound of the true
// sup (linear segments are probed only at the candidate times).
inline double sup_distance(const GridPath& p1, const GridPath& p2, double delta) {
  double lo = std::max(p1.start(), p2.start());
  double hi = std::min(p1.domain_end(), p2.domain_end());
  if (!(lo <= hi)) throw std::invalid_argument("sup_distance: disjoint domains");
  std::vector<double> ts = candidate_times(p1.knots(), p2.knots(), lo, hi, delta);
  double best = 0.0;
  for (double t : ts) {
    best = std::max(best, std::abs(p1.at(t) - p2.at(t)));
    best = std::max(best, std::abs(p1.left_limit(t) - p2.left_limit(t)));
  }
  return best;
}

}  // namespace transq
