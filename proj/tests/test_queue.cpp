#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "transq/kmt.hpp"
#include "transq/queue.hpp"

using namespace transq;

namespace {

// hand-assembled sample: fixed epochs/marks/services, drivers unused by the
// queue itself
CoupledSample manual_sample(std::vector<double> epochs, std::vector<int> marks,
                            std::vector<double> services, double p = 1.0) {
  long long n = static_cast<long long>(epochs.size());
  CoupledSample s{n,
                  p,
                  AssumptionBranch::Stationary,
                  uniform01(),
                  uniform01(),
                  0.0,
                  gamma_dist(2.0, 1.0),
                  std::move(epochs),
                  std::move(marks),
                  std::move(services),
                  RefinableBrownianPath(1.0, 2, RngStream(1)),
                  RefinableBrownianPath(1.0, 2, RngStream(2)),
                  RefinableBrownianPath(1.0, 2, RngStream(3)),
                  {}};
  return s;
}

QueueInputs inputs_for(const CoupledSample& s, double cn) {
  return QueueInputs{s.n, s.p, s.arrival_law, s.service, cn};
}

CoupledSample random_sample(long long n, double p, std::uint64_t seed) {
  CoupledSampleConfig cfg;
  cfg.n = n;
  cfg.p = p;
  cfg.arrival_limit = uniform01();
  cfg.service = gamma_dist(2.0, 1.0);
  cfg.streams = StreamFactory{seed, static_cast<std::uint64_t>(n), 0};
  return build_coupled_sample(cfg);
}

// independent unfinished-work accounting from completion times
double unfinished_work_oracle(const QueueTrace& tr, double cn, double t) {
  double arrived = 0.0;
  for (std::size_t k = 0; k < tr.accepted_times.size(); ++k)
    if (tr.accepted_times[k] <= t) arrived += tr.services_used[k];
  double served = 0.0;
  for (std::size_t k = 0; k < tr.completion_times.size(); ++k) {
    double start = tr.completion_times[k] - tr.services_used[k] / cn;
    double overlap = std::min(t, tr.completion_times[k]) - start;
    if (overlap > 0.0) served += cn * overlap;
  }
  return arrived - served;
}

}  // namespace

TEST_CASE("arrivals path follows the marks", "[queue]") {
  auto all = manual_sample({0.5, 0.2, 0.9}, {1, 1, 1}, {1.0, 1.0, 1.0});
  GridPath a = arrivals_path(all);
  CHECK(a.at(1.0) == 3.0);  // p=1: A_n = n G_n

  auto none = manual_sample({0.5, 0.2, 0.9}, {0, 0, 0}, {1.0, 1.0, 1.0}, 0.5);
  GridPath z = arrivals_path(none);
  for (double v : z.values()) CHECK(v == 0.0);

  auto some = manual_sample({0.5, 0.2, 0.9}, {1, 0, 1}, {1.0, 1.0, 1.0}, 0.5);
  GridPath s = arrivals_path(some);
  CHECK(s.at(0.2) == 0.0);
  CHECK(s.at(0.5) == 1.0);
  CHECK(s.at(0.9) == 2.0);
  CHECK(s.left_limit(0.5) == 0.0);
}

TEST_CASE("workload path consumes services in acceptance order", "[queue]") {
  GridPath no_arrivals({0.0}, {0.0}, PathMode::Step, 5.0);
  GridPath w0 = workload_path(no_arrivals, std::vector<double>{});
  CHECK(w0.at(4.0) == 0.0);

  GridPath one({0.0, 1.0}, {0.0, 1.0}, PathMode::Step, 3.0);
  std::vector<double> v{2.5};
  GridPath w1 = workload_path(one, v);
  CHECK(w1.at(0.5) == 0.0);
  CHECK(w1.at(1.0) == 2.5);

  RngStream rng(404);
  std::vector<double> epochs(5), services(5);
  std::vector<int> marks(5, 1);
  for (auto& e : epochs) e = rng.u01();
  for (auto& s : services) s = 0.5 + rng.u01();
  auto sample = manual_sample(epochs, marks, services);
  GridPath a = arrivals_path(sample);
  GridPath w = workload_path(a, services);
  std::vector<double> sorted_epochs(epochs);
  std::sort(sorted_epochs.begin(), sorted_epochs.end());
  double acc = 0.0;
  for (std::size_t k = 0; k < sorted_epochs.size(); ++k) {
    acc += services[k];
    REQUIRE(w.at(sorted_epochs[k]) == Catch::Approx(acc));
  }
}

TEST_CASE("truncated renewal counts completable jobs", "[queue]") {
  std::vector<double> v{1.0, 2.0, 1.0};
  CHECK(truncated_renewal(v, 1.0, 0.0) == 0);
  CHECK(truncated_renewal(v, 1.0, 3.0) == 2);
  CHECK(truncated_renewal(v, 1.0, 100.0) == 3);  // capped at n past S_n/c_n
  CHECK(truncated_renewal(v, 2.0, 2.0) == 3);
  CHECK_THROWS_AS(truncated_renewal(v, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("single-customer trace by hand", "[queue]") {
  auto s = manual_sample({1.0}, {1}, {2.0});
  QueueTrace tr = simulate(inputs_for(s, 1.0), s);
  CHECK(tr.queue_length.at(0.5) == 0.0);
  CHECK(tr.queue_length.at(1.0) == 1.0);
  CHECK(tr.queue_length.at(2.9) == 1.0);
  CHECK(tr.queue_length.at(3.0) == 0.0);
  CHECK(tr.emptying_time == Catch::Approx(3.0));
  // D_n(t) = (t-1)^+ ^ 2
  CHECK(tr.busy_time.at(0.7) == 0.0);
  CHECK(tr.busy_time.at(2.0) == Catch::Approx(1.0));
  CHECK(tr.busy_time.at(3.0) == Catch::Approx(2.0));
  CHECK(tr.busy_time.at(3.5) == Catch::Approx(2.0));
  CHECK(tr.idle_time.at(3.0) == Catch::Approx(1.0));
  CHECK(tr.completions.at(2.99) == 0.0);
  CHECK(tr.completions.at(3.0) == 1.0);
}

TEST_CASE("zero accepted arrivals leave the system empty", "[queue]") {
  auto s = manual_sample({0.3, 0.6}, {0, 0}, {1.0, 1.0}, 0.5);
  QueueTrace tr = simulate(inputs_for(s, 2.0), s);
  CHECK(tr.queue_length.at(tr.horizon) == 0.0);
  CHECK(tr.busy_time.at(tr.horizon) == 0.0);
  CHECK(tr.idle_time.at(tr.horizon) == Catch::Approx(tr.horizon));
  GridPath rem = remaining_workload(tr, 2.0);
  for (double v : rem.values()) CHECK(v == 0.0);
}

TEST_CASE("queue identity Q = A - M(D) at event epochs", "[queue]") {
  for (int inst = 0; inst < 100; ++inst) {
    auto s = random_sample(50, 0.7, mix_keys({888, static_cast<std::uint64_t>(inst)}));
    double cn = 50.0 * 2.0 * 0.7;
    QueueTrace tr = simulate(inputs_for(s, cn), s);
    for (double t : tr.queue_length.knots()) {
      double lhs = tr.queue_length.at(t);
      double rhs = tr.arrivals.at(t) - tr.completions.at(t);
      REQUIRE(lhs == Catch::Approx(rhs).margin(1e-9));
    }
    // completions really are M_n(D_n(t)); probe between events so the
    // partial-sum boundary is not a floating-point knife edge
    for (std::size_t k = 1; k < tr.completion_times.size(); ++k) {
      double t = 0.5 * (tr.completion_times[k - 1] + tr.completion_times[k]);
      long long m = truncated_renewal(tr.services_used, cn, tr.busy_time.at(t));
      REQUIRE(tr.completions.at(t) == Catch::Approx(static_cast<double>(m)));
    }
  }
}

TEST_CASE("non-idling, monotonicity and final state", "[queue]") {
  auto s = random_sample(80, 0.6, 1234);
  QueueTrace tr = simulate(inputs_for(s, 40.0), s);
  // final state: empty, all accepted work completed
  CHECK(tr.queue_length.at(tr.horizon) == 0.0);
  CHECK(tr.completions.at(tr.horizon) == tr.arrivals.at(tr.horizon));
  // monotone A, W, M(D)
  for (const GridPath* p : {&tr.arrivals, &tr.workload, &tr.completions})
    for (std::size_t i = 1; i < p->size(); ++i) REQUIRE(p->values()[i] >= p->values()[i - 1]);
  // idle time grows only while the queue is empty
  const auto& ik = tr.idle_time.knots();
  for (std::size_t i = 1; i < ik.size(); ++i) {
    double gain = tr.idle_time.values()[i] - tr.idle_time.values()[i - 1];
    if (gain > 1e-12) {
      double mid = 0.5 * (ik[i - 1] + ik[i]);
      REQUIRE(tr.queue_length.at(mid) == 0.0);
    }
  }
  // work conservation at event epochs
  ReflectedNetput net(tr.workload, 40.0);
  for (double t : tr.queue_length.knots()) {
    double direct = tr.workload.at(t) - 40.0 * tr.busy_time.at(t);
    REQUIRE(net.at(t) == Catch::Approx(direct).margin(1e-8));
  }
}

TEST_CASE("remaining workload: hand case and event-engine cross-check", "[queue]") {
  auto s = manual_sample({1.0}, {1}, {2.0});
  QueueTrace tr = simulate(inputs_for(s, 1.0), s);
  ReflectedNetput net(tr.workload, 1.0);
  CHECK(net.at(0.5) == 0.0);
  CHECK(net.at(1.0) == Catch::Approx(2.0));
  CHECK(net.left_limit(1.0) == 0.0);
  CHECK(net.at(2.0) == Catch::Approx(1.0));
  CHECK(net.at(3.0) == 0.0);
  CHECK(net.at(5.0) == 0.0);
  GridPath rem = remaining_workload(tr, 1.0);
  CHECK(rem.at(1.0) == Catch::Approx(2.0));
  CHECK(rem.at(3.0) == Catch::Approx(0.0).margin(1e-12));

  for (int inst = 0; inst < 100; ++inst) {
    auto rs = random_sample(30, 0.8, mix_keys({777, static_cast<std::uint64_t>(inst)}));
    double cn = 10.0;
    QueueTrace rtr = simulate(inputs_for(rs, cn), rs);
    ReflectedNetput rnet(rtr.workload, cn);
    std::vector<double> probes(rtr.queue_length.knots());
    probes.push_back(0.5 * rtr.horizon);
    for (double t : probes)
      REQUIRE(rnet.at(t) == Catch::Approx(unfinished_work_oracle(rtr, cn, t)).margin(1e-8));
  }
}

TEST_CASE("simulate validates inputs", "[queue]") {
  auto s = manual_sample({0.5}, {1}, {1.0});
  QueueInputs bad{2, 1.0, uniform01(), gamma_dist(2.0, 1.0), 1.0};
  CHECK_THROWS_AS(simulate(bad, s), std::invalid_argument);
  QueueInputs bad_cn{1, 1.0, uniform01(), gamma_dist(2.0, 1.0), 0.0};
  CHECK_THROWS_AS(simulate(bad_cn, s), std::invalid_argument);
  auto neg = manual_sample({0.5}, {1}, {-1.0});
  CHECK_THROWS_AS(simulate(inputs_for(neg, 1.0), neg), std::invalid_argument);
}

TEST_CASE("trace summary row shape", "[queue]") {
  auto s = manual_sample({1.0}, {1}, {2.0});
  QueueInputs in = inputs_for(s, 1.0);
  QueueTrace tr = simulate(in, s);
  std::ostringstream os;
  write_trace_summary_header(os);
  write_trace_summary_row(os, in, tr);
  CHECK(os.str().find("n,p,cn,max_queue,emptying_time,total_idle") == 0);
  CHECK(os.str().find("1,1,1,1,3,") != std::string::npos);
}
