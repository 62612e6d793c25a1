#pragma once

// Exact discrete-event realization of the RS(G,p)/G/1 queue.
//
// Single server, infinite buffer, FCFS, non-preemptive, non-idling, starts
// empty. The server works at rate c_n, so job k holds it for V_k / c_n time
// units; dropout marks are consumed in arrival-rank order and service times
// in acceptance order. All performance-metric paths come out of one event
// sweep:
//   A_n(t)   accepted arrivals           (step)
//   W_n(t)   cumulative offered load     (step)
//   Q_n(t)   jobs in system              (step)
//   D_n(t)   cumulative busy time        (piecewise linear)
//   I_n(t)   idle time t - D_n(t)        (piecewise linear)
//   M_n(D_n(t)) completed jobs           (step)

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "transq/distributions.hpp"
#include "transq/grid_path.hpp"
#include "transq/kmt.hpp"

namespace transq {

struct QueueInputs {
  long long n = 1;
  double p = 1.0;
  DistributionSpec arrival;
  DistributionSpec service;
  double cn = 1.0;  // jobs completed per unit time when busy
};

struct QueueTrace {
  GridPath arrivals;       // A_n
  GridPath workload;       // W_n
  GridPath queue_length;   // Q_n
  GridPath busy_time;      // D_n
  GridPath idle_time;      // I_n
  GridPath completions;    // t -> M_n(D_n(t))
  double emptying_time = 0.0;
  double horizon = 0.0;
  std::vector<double> accepted_times;    // sorted arrival epochs of accepted customers
  std::vector<double> completion_times;  // sorted job completion epochs
  std::vector<double> services_used;     // V_k in acceptance order
};

namespace detail {

// sorted (epoch, jump) events, ties merged, into a step path anchored at 0
inline GridPath step_from_events(const std::vector<std::pair<double, double>>& events,
                                 double horizon) {
  std::vector<double> ks{0.0}, vs{0.0};
  double level = 0.0;
  for (std::size_t i = 0; i < events.size();) {
    double t = events[i].first;
    double jump = 0.0;
    while (i < events.size() && events[i].first == t) jump += events[i++].second;
    level += jump;
    if (t == 0.0) {
      vs[0] = level;
    } else {
      ks.push_back(t);
      vs.push_back(level);
    }
  }
  return GridPath(std::move(ks), std::move(vs), PathMode::Step, horizon);
}

}  // namespace detail

// A_n as a step path: jump zeta at each arrival epoch, dropout mark attached
// to the customer and consumed in rank order.
inline GridPath arrivals_path(const CoupledSample& sample,
                              double horizon = std::numeric_limits<double>::quiet_NaN()) {
  std::vector<std::pair<double, double>> events;
  events.reserve(sample.arrival_epochs.size());
  for (std::size_t i = 0; i < sample.arrival_epochs.size(); ++i)
    if (sample.dropout[i] != 0) events.emplace_back(sample.arrival_epochs[i], 1.0);
  std::sort(events.begin(), events.end());
  double end = horizon;
  if (std::isnan(end)) {
    end = 0.0;
    for (double t : sample.arrival_epochs) end = std::max(end, t);
  }
  return detail::step_from_events(events, end);
}

// W_n(t) = sum_{k <= A_n(t)} V_k; the k-th accepted arrival consumes V_k.
inline GridPath workload_path(const GridPath& arrivals, std::span<const double> services) {
  std::vector<double> ks{arrivals.knots().front()}, vs{0.0};
  double level = 0.0;
  std::size_t consumed = 0;
  long long prev = static_cast<long long>(std::llround(arrivals.values().front()));
  for (long long k = 0; k < prev; ++k) level += services[consumed++];
  vs[0] = level;
  for (std::size_t i = 1; i < arrivals.size(); ++i) {
    long long cur = static_cast<long long>(std::llround(arrivals.values()[i]));
    if (cur > static_cast<long long>(services.size()))
      throw std::invalid_argument("workload_path: fewer services than arrivals");
    for (long long k = prev; k < cur; ++k) level += services[consumed++];
    ks.push_back(arrivals.knots()[i]);
    vs.push_back(level);
    prev = cur;
  }
  return GridPath(std::move(ks), std::move(vs), PathMode::Step, arrivals.domain_end());
}

// M_n(t) = sup{0 <= m <= n : sum_{i<=m} V_i <= c_n t}
inline long long truncated_renewal(std::span<const double> services, double cn, double t) {
  if (!(cn > 0.0)) throw std::invalid_argument("truncated_renewal: cn must be positive");
  if (t < 0.0) return 0;
  double budget = cn * t;
  double acc = 0.0;
  long long m = 0;
  for (double v : services) {
    acc += v;
    if (acc > budget) break;
    ++m;
  }
  return m;
}

inline QueueTrace simulate(const QueueInputs& inputs, const CoupledSample& sample) {
  if (inputs.n != sample.n || inputs.p != sample.p)
    throw std::invalid_argument("simulate: inputs and sample disagree on (n, p)");
  if (!(inputs.cn > 0.0)) throw std::invalid_argument("simulate: cn must be positive");
  if (sample.services.size() != static_cast<std::size_t>(sample.n))
    throw std::invalid_argument("simulate: malformed sample");
  for (double v : sample.services)
    if (!(v >= 0.0)) throw std::invalid_argument("simulate: negative service time");

  double max_epoch = 0.0, total_work = 0.0;
  for (double t : sample.arrival_epochs) max_epoch = std::max(max_epoch, t);
  for (double v : sample.services) total_work += v;
  double horizon = max_epoch + total_work / inputs.cn + 1.0;

  QueueTrace tr;
  tr.horizon = horizon;
  tr.arrivals = arrivals_path(sample, horizon);

  // accepted epochs, ties kept (index order), services in acceptance order
  std::vector<double> arr;
  for (std::size_t i = 0; i < sample.arrival_epochs.size(); ++i)
    if (sample.dropout[i] != 0) arr.push_back(sample.arrival_epochs[i]);
  std::stable_sort(arr.begin(), arr.end());
  tr.accepted_times = arr;
  tr.services_used.assign(sample.services.begin(),
                          sample.services.begin() + static_cast<std::ptrdiff_t>(arr.size()));

  tr.workload = workload_path(tr.arrivals, sample.services);

  // FCFS completions at rate cn
  std::vector<double> done(arr.size());
  double free_at = 0.0;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    double start = std::max(arr[k], free_at);
    done[k] = start + tr.services_used[k] / inputs.cn;
    free_at = done[k];
  }
  tr.completion_times = done;
  tr.emptying_time = done.empty() ? 0.0 : done.back();

  std::vector<std::pair<double, double>> q_events;
  for (double t : arr) q_events.emplace_back(t, 1.0);
  for (double t : done) q_events.emplace_back(t, -1.0);
  std::sort(q_events.begin(), q_events.end());
  tr.queue_length = detail::step_from_events(q_events, horizon);

  std::vector<std::pair<double, double>> c_events;
  for (double t : done) c_events.emplace_back(t, 1.0);
  tr.completions = detail::step_from_events(c_events, horizon);

  // busy periods: non-idling, so the server is busy exactly on the union of
  // [start_k, done_k]
  std::vector<double> dk{0.0}, dv{0.0};
  double busy = 0.0;
  std::size_t k = 0;
  while (k < arr.size()) {
    double b = std::max(arr[k], dk.back());
    double e = done[k];
    while (k + 1 < arr.size() && arr[k + 1] <= done[k]) e = done[++k];
    ++k;
    if (b > dk.back()) {
      dk.push_back(b);
      dv.push_back(busy);
    }
    busy += e - b;
    dk.push_back(e);
    dv.push_back(busy);
  }
  if (dk.back() < horizon) {
    dk.push_back(horizon);
    dv.push_back(busy);
  }
  tr.busy_time = GridPath(dk, dv, PathMode::Linear, horizon);
  std::vector<double> iv(dk.size());
  for (std::size_t i = 0; i < dk.size(); ++i) iv[i] = dk[i] - dv[i];
  tr.idle_time = GridPath(std::move(dk), std::move(iv), PathMode::Linear, horizon);
  return tr;
}

// Exact evaluator of phi(W - c*id) for a nondecreasing step path W: jumps up
// at W's knots, drains at rate c while positive. The running infimum of the
// netput is continuous here, which at() and left_limit() rely on.
class ReflectedNetput {
 public:
  ReflectedNetput(GridPath w, double rate) : w_(std::move(w)), c_(rate) {
    if (w_.mode() != PathMode::Step)
      throw std::invalid_argument("ReflectedNetput: workload path must be a step path");
    const auto& ks = w_.knots();
    const auto& vs = w_.values();
    inf_at_knot_.resize(ks.size());
    double m = vs[0] - c_ * ks[0];
    inf_at_knot_[0] = m;
    for (std::size_t i = 1; i < ks.size(); ++i) {
      m = std::min(m, vs[i - 1] - c_ * ks[i]);  // left limit entering knot i
      m = std::min(m, vs[i] - c_ * ks[i]);
      inf_at_knot_[i] = m;
    }
  }

  double at(double t) const {
    t = std::max(t, w_.knots().front());
    std::size_t i = locate(t);
    double f = w_.values()[i] - c_ * t;
    double inf = std::min(inf_at_knot_[i], f);
    return f - inf;
  }

  double left_limit(double t) const {
    t = std::max(t, w_.knots().front());
    double f = w_.left_limit(t) - c_ * t;
    std::size_t i = locate(t);
    double inf = inf_at_knot_[i];
    if (w_.knots()[i] == t && i > 0)
      inf = inf_at_knot_[i - 1];  // exclude the knot itself
    inf = std::min(inf, f);
    return f - inf;
  }

  const GridPath& workload() const { return w_; }
  double rate() const { return c_; }

 private:
  std::size_t locate(double t) const {
    const auto& ks = w_.knots();
    auto it = std::upper_bound(ks.begin(), ks.end(), t);
    return static_cast<std::size_t>(it - ks.begin()) - 1;
  }

  GridPath w_;
  double c_;
  std::vector<double> inf_at_knot_;
};

// phi(W_n - c_n*id) sampled at the trace's event epochs (plus any extra
// times). Values are exact at the knots; between knots the returned linear
// path smears the upward jumps across one cell, so pass a fine grid when the
// shape between events matters.
inline GridPath remaining_workload(const QueueTrace& trace, double cn,
                                   std::span<const double> extra_times = {}) {
  ReflectedNetput net(trace.workload, cn);
  std::vector<double> ks(trace.workload.knots());
  ks.insert(ks.end(), trace.completion_times.begin(), trace.completion_times.end());
  ks.insert(ks.end(), extra_times.begin(), extra_times.end());
  ks.push_back(trace.horizon);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::vector<double> vs(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) vs[i] = net.at(ks[i]);
  return GridPath(std::move(ks), std::move(vs), PathMode::Linear, trace.horizon);
}

// one summary row per replication
inline void write_trace_summary_header(std::ostream& os) {
  os << "n,p,cn,max_queue,emptying_time,total_idle\n";
}

inline void write_trace_summary_row(std::ostream& os, const QueueInputs& in, const QueueTrace& tr) {
  double maxq = *std::max_element(tr.queue_length.values().begin(), tr.queue_length.values().end());
  os << in.n << ',' << in.p << ',' << in.cn << ',' << maxq << ',' << tr.emptying_time << ','
     << tr.idle_time.at(tr.horizon) << '\n';
}

}  // namespace transq
