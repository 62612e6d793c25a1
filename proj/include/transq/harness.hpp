#pragma once

// Experiment orchestration: coupled simulation vs approximation error
// ladders, rate fitting, bound validation, and the file formats the CLI
// speaks. Replications fan out over a bounded worker pool; every stream is
// keyed by (master seed, n, replication), so outputs are byte-identical for
// a fixed config regardless of scheduling (runtime columns excepted).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "transq/approx.hpp"
#include "transq/bounds.hpp"
#include "transq/brownian.hpp"
#include "transq/distributions.hpp"
#include "transq/grid_path.hpp"
#include "transq/kmt.hpp"
#include "transq/queue.hpp"
#include "transq/rng.hpp"

namespace transq {

// ---------------------------------------------------------------------------
// configuration

struct ExperimentConfig {
  std::string kind = "ladder";  // ladder | couple-arrival | couple-workload |
                                // couple-remaining-workload | couple-queue |
                                // kmt-empirical | validate-bounds | simulate-only
  std::vector<long long> ladder{64, 128, 256, 512, 1024, 2048, 4096, 8192};
  int replications = 200;
  long long n_single = 0;  // simulate-only size; defaults to ladder.front()
  double p = 0.7;
  std::string arrival = "uniform01";
  std::string branch = "2.1";  // 2.1 | 2.4
  std::string mixture;         // tilt family for branch 2.4
  double mixture_coeff = 0.0;
  std::string service = "gamma:2:1";
  std::string cn_rule = "critical";  // critical | const:<v> | poly:<a>[:<k>]
  std::uint64_t seed = 20260809;
  int delta_cells = 4096;
  double truncate = 0.0;  // quantile truncation horizon for unbounded supports
  std::string out_dir = "out";
  int jobs = 0;  // 0: hardware concurrency
  bool rate_checks = true;  // set by the CLI; `couple` emits records without pass/fail gates
};

// "family[:arg[:arg]]": uniform01, exponential:rate, gamma:shape:scale,
// gaussian:mean:sd, bernoulli:p, deterministic:value, table:path.csv
inline DistributionSpec parse_family(const std::string& text, double truncate = 0.0) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  auto arg = [&](std::size_t i) -> double {
    if (i >= parts.size()) throw std::invalid_argument("parse_family: missing argument in '" + text + "'");
    return std::stod(parts[i]);
  };
  DistributionSpec spec;
  if (parts[0] == "uniform01") spec = uniform01();
  else if (parts[0] == "exponential") spec = exponential(arg(1));
  else if (parts[0] == "gamma") spec = gamma_dist(arg(1), arg(2));
  else if (parts[0] == "gaussian") spec = gaussian(arg(1), arg(2));
  else if (parts[0] == "bernoulli") spec = bernoulli(arg(1));
  else if (parts[0] == "deterministic") spec = gaussian(arg(1), 0.0);
  else if (parts[0] == "table") {
    if (parts.size() < 2) throw std::invalid_argument("parse_family: table needs a path");
    std::ifstream in(parts[1]);
    if (!in) throw std::runtime_error("parse_family: cannot open cdf table '" + parts[1] + "'");
    spec = load_cdf_table(in);
  } else {
    throw std::invalid_argument("parse_family: unknown family '" + parts[0] + "'");
  }
  if (truncate > 0.0 && !std::isfinite(spec.support.hi)) spec.truncate_at = truncate;
  return spec;
}

inline double cn_value(const ExperimentConfig& cfg, long long n, double service_mean) {
  const std::string& r = cfg.cn_rule;
  if (r == "critical") return static_cast<double>(n) * service_mean * cfg.p;
  auto colon = r.find(':');
  std::string head = r.substr(0, colon);
  if (head == "const") return std::stod(r.substr(colon + 1));
  if (head == "poly") {
    std::string rest = r.substr(colon + 1);
    auto c2 = rest.find(':');
    double a = std::stod(rest.substr(0, c2));
    double k = c2 == std::string::npos ? 1.0 : std::stod(rest.substr(c2 + 1));
    return k * std::pow(static_cast<double>(n), a);
  }
  throw std::invalid_argument("cn rule must be critical, const:<v> or poly:<a>[:<k>]");
}

// key = value lines, '#' comments
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    try {
      if (key == "kind") cfg.kind = val;
      else if (key == "ladder") {
        cfg.ladder.clear();
        std::istringstream ls(val);
        std::string tok;
        while (std::getline(ls, tok, ',')) cfg.ladder.push_back(std::stoll(tok));
      } else if (key == "replications") cfg.replications = std::stoi(val);
      else if (key == "n") cfg.n_single = std::stoll(val);
      else if (key == "p") cfg.p = std::stod(val);
      else if (key == "arrival") cfg.arrival = val;
      else if (key == "branch") cfg.branch = val;
      else if (key == "mixture") cfg.mixture = val;
      else if (key == "mixture_coeff") cfg.mixture_coeff = std::stod(val);
      else if (key == "service") cfg.service = val;
      else if (key == "cn") cfg.cn_rule = val;
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "delta_cells") cfg.delta_cells = std::stoi(val);
      else if (key == "truncate") cfg.truncate = std::stod(val);
      else if (key == "out") cfg.out_dir = val;
      else if (key == "jobs") cfg.jobs = std::stoi(val);
      else throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

inline void validate_ladder(const ExperimentConfig& cfg) {
  if (cfg.replications < 1) throw std::invalid_argument("config: replications must be >= 1");
  if (cfg.ladder.empty()) throw std::invalid_argument("config: empty ladder");
  for (std::size_t i = 0; i < cfg.ladder.size(); ++i) {
    if (cfg.ladder[i] < 2) throw std::invalid_argument("config: ladder entries must be >= 2");
    if (i > 0 && cfg.ladder[i] <= cfg.ladder[i - 1])
      throw std::invalid_argument("config: ladder must be increasing");
  }
}

inline AssumptionBranch parse_branch(const std::string& b) {
  if (b == "2.1" || b == "stationary") return AssumptionBranch::Stationary;
  if (b == "2.4" || b == "varying") return AssumptionBranch::VaryingLaw;
  throw std::invalid_argument("branch must be 2.1 or 2.4");
}

// ---------------------------------------------------------------------------
// ladder records

struct LadderRecord {
  long long n = 0;
  int replication = 0;
  std::string metric;
  double error = 0.0;
  double runtime_ms = 0.0;
  std::uint64_t seed = 0;
};

inline void write_records_csv(std::ostream& os, std::span<const LadderRecord> records) {
  os << "n,replication,metric,sup_error,runtime_ms,seed\n";
  os << std::setprecision(17);
  for (const auto& r : records)
    os << r.n << ',' << r.replication << ',' << r.metric << ',' << r.error << ',' << r.runtime_ms
       << ',' << r.seed << '\n';
}

inline std::vector<LadderRecord> read_records_csv(std::istream& in) {
  std::vector<LadderRecord> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find("n,") == 0 || line.find("n\r") == 0) continue;
    }
    std::istringstream ls(line);
    LadderRecord r;
    std::string tok;
    std::getline(ls, tok, ',');
    r.n = std::stoll(tok);
    std::getline(ls, tok, ',');
    r.replication = std::stoi(tok);
    std::getline(ls, r.metric, ',');
    std::getline(ls, tok, ',');
    r.error = std::stod(tok);
    if (std::getline(ls, tok, ',')) r.runtime_ms = std::stod(tok);
    if (std::getline(ls, tok, ',')) r.seed = std::stoull(tok);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// one coupled replication

inline std::vector<std::string> metrics_for_kind(const std::string& kind) {
  if (kind == "couple-arrival") return {"arrival"};
  if (kind == "couple-workload") return {"workload"};
  if (kind == "couple-remaining-workload") return {"workload_reflected"};
  if (kind == "couple-queue") return {"queue_length"};
  return {"arrival", "workload", "workload_reflected", "queue_length"};
}

inline CoupledSampleConfig sample_config(const ExperimentConfig& cfg, long long n, int rep) {
  CoupledSampleConfig sc;
  sc.n = n;
  sc.p = cfg.p;
  sc.arrival_limit = parse_family(cfg.arrival, cfg.truncate);
  sc.branch = parse_branch(cfg.branch);
  if (sc.branch == AssumptionBranch::VaryingLaw) {
    if (cfg.mixture.empty()) throw std::invalid_argument("branch 2.4 needs a mixture family");
    sc.arrival_tilt = parse_family(cfg.mixture, cfg.truncate);
    sc.mixture_coeff = cfg.mixture_coeff;
  }
  sc.service = parse_family(cfg.service);
  sc.streams = StreamFactory{cfg.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)};
  return sc;
}

// delta-grid over [0, horizon] joined with the trace's event epochs
inline std::vector<double> make_eval_grid(const QueueTrace& tr, int cells) {
  std::vector<double> ts;
  ts.reserve(static_cast<std::size_t>(cells) + tr.accepted_times.size() +
             tr.completion_times.size() + 1);
  for (int i = 0; i < cells; ++i)
    ts.push_back(tr.horizon * static_cast<double>(i) / static_cast<double>(cells));
  ts.push_back(tr.horizon);
  ts.insert(ts.end(), tr.accepted_times.begin(), tr.accepted_times.end());
  ts.insert(ts.end(), tr.completion_times.begin(), tr.completion_times.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

// sup | phi(W_n - cn id) - phi(R_n - cn id) | with the left side evaluated
// exactly (jumps and all) and the right side knot-exact on its grid
inline double reflected_workload_sup(const QueueTrace& tr, double cn, const GridPath& R,
                                     double delta) {
  ReflectedNetput net(tr.workload, cn);
  std::vector<double> nv(R.size());
  for (std::size_t i = 0; i < nv.size(); ++i) nv[i] = R.values()[i] - cn * R.knots()[i];
  GridPath phi_r = reflect(GridPath(R.knots(), std::move(nv), PathMode::Linear, R.domain_end()));
  double hi = std::min(tr.horizon, phi_r.domain_end());
  std::vector<double> ts = candidate_times(tr.workload.knots(), phi_r.knots(), 0.0, hi, delta);
  double best = 0.0;
  for (double t : ts) {
    double r = phi_r.at(t);  // continuous
    best = std::max(best, std::abs(net.at(t) - r));
    best = std::max(best, std::abs(net.left_limit(t) - r));
  }
  return best;
}

struct ReplicationOutput {
  std::vector<LadderRecord> records;
  QueueTrace trace;
  ApproximantSet approx;
};

// Builds one coupled sample, simulates the queue, builds the approximants
// from the same drivers, and emits one sup-error record per requested
// metric.
inline ReplicationOutput run_coupled_replication(const ExperimentConfig& cfg, long long n,
                                                 int rep) {
  auto t0 = std::chrono::steady_clock::now();
  CoupledSampleConfig sc = sample_config(cfg, n, rep);
  CoupledSample sample = build_coupled_sample(sc);
  double cn = cn_value(cfg, n, sc.service.mean);
  QueueInputs inputs{n, cfg.p, sample.arrival_law, sc.service, cn};
  QueueTrace trace = simulate(inputs, sample);
  std::vector<double> grid = make_eval_grid(trace, cfg.delta_cells);
  ApproximantSet approx = build_approximants(sample, cn, grid);
  double delta = trace.horizon / cfg.delta_cells;

  ReplicationOutput out;
  for (const std::string& metric : metrics_for_kind(cfg.kind)) {
    double err;
    if (metric == "arrival") err = sup_distance(trace.arrivals, approx.H, delta);
    else if (metric == "workload") err = sup_distance(trace.workload, approx.R, delta);
    else if (metric == "workload_reflected") err = reflected_workload_sup(trace, cn, approx.R, delta);
    else err = sup_distance(trace.queue_length, reflect(approx.X), delta);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.records.push_back({n, rep, metric, err, ms, cfg.seed});
  }
  out.trace = std::move(trace);
  out.approx = std::move(approx);
  return out;
}

// ---------------------------------------------------------------------------
// rate fitting

enum class RateCorrection { SqrtLogN, LogN, None };

inline RateCorrection parse_correction(const std::string& s) {
  if (s == "sqrt-log-n") return RateCorrection::SqrtLogN;
  if (s == "log-n") return RateCorrection::LogN;
  if (s == "none") return RateCorrection::None;
  throw std::invalid_argument("correction must be sqrt-log-n, log-n or none");
}

inline const char* to_string(RateCorrection c) {
  switch (c) {
    case RateCorrection::SqrtLogN: return "sqrt-log-n";
    case RateCorrection::LogN: return "log-n";
    default: return "none";
  }
}

inline double correction_value(RateCorrection c, long long n) {
  double ln = std::log(static_cast<double>(n));
  switch (c) {
    case RateCorrection::SqrtLogN: return std::sqrt(ln);
    case RateCorrection::LogN: return ln;
    default: return 1.0;
  }
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  int points = 0;
};

inline std::map<long long, double> median_errors(std::span<const LadderRecord> records,
                                                 const std::string& metric) {
  std::map<long long, std::vector<double>> byn;
  for (const auto& r : records)
    if (r.metric == metric) byn[r.n].push_back(r.error);
  std::map<long long, double> med;
  for (auto& [n, v] : byn) {
    std::sort(v.begin(), v.end());
    std::size_t k = v.size();
    med[n] = k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
  }
  return med;
}

inline double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  double w = pos - static_cast<double>(i);
  return v[i] + w * (v[i + 1] - v[i]);
}

// least squares of log(median error / correction(n)) against log n
inline RateFit fit_rate(std::span<const LadderRecord> records, const std::string& metric,
                        RateCorrection corr) {
  std::map<long long, double> med = median_errors(records, metric);
  if (med.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 ladder points");
  std::vector<double> xs, ys;
  for (const auto& [n, m] : med) {
    if (!(m > 0.0)) throw std::invalid_argument("fit_rate: nonpositive median error");
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(m / correction_value(corr, n)));
  }
  double k = static_cast<double>(xs.size());
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  RateFit fit;
  fit.points = static_cast<int>(xs.size());
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double res = ys[i] - (fit.intercept + fit.slope * xs[i]);
    rss += res * res;
  }
  if (xs.size() > 2) fit.stderr_slope = std::sqrt(rss / (k - 2.0) / sxx);
  return fit;
}

// ---------------------------------------------------------------------------
// worker pool

template <class Fn>
void parallel_for(int jobs, std::size_t count, Fn&& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, static_cast<int>(std::min<std::size_t>(count, 1024))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// KMT empirical-process statistic

// sup_t | n F_n(t) - (n t + sqrt(n) B^{br,n}(t)) | for uniforms constructed
// from their own driving bridge; this is sup_t sqrt(n)|alpha_n - B^{br,n}|.
inline double kmt_empirical_statistic(long long n, std::uint64_t master, int rep, int delta_cells) {
  StreamFactory streams{master, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)};
  RefinableBrownianPath motion(1.0, 2, streams.make(StreamRole::Bridge));
  BrownianBridge bridge(motion);
  RngStream aux = streams.make(StreamRole::CellPlacement);
  UniformSample us = uniforms_from_bridge(n, bridge, aux);

  std::vector<double> sorted(us.uniforms);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> ks{0.0}, vs{0.0};
  for (std::size_t i = 0; i < sorted.size();) {
    double t = sorted[i];
    while (i < sorted.size() && sorted[i] == t) ++i;
    ks.push_back(t);
    vs.push_back(static_cast<double>(i));
  }
  GridPath counts(std::move(ks), std::move(vs), PathMode::Step, 1.0);

  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(delta_cells) + sorted.size() + 1);
  for (int i = 0; i <= delta_cells; ++i)
    grid.push_back(static_cast<double>(i) / static_cast<double>(delta_cells));
  grid.insert(grid.end(), sorted.begin(), sorted.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  double root_n = std::sqrt(static_cast<double>(n));
  std::vector<double> gv(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    gv[i] = static_cast<double>(n) * grid[i] + root_n * bridge.at(grid[i]);
  GridPath gaussian_side(grid, std::move(gv), PathMode::Linear, 1.0);
  return sup_distance(counts, gaussian_side, 1.0 / delta_cells);
}

// ---------------------------------------------------------------------------
// experiment outcomes and reports

struct CheckResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct ExperimentOutcome {
  std::vector<LadderRecord> records;
  std::vector<CheckResult> checks;
  std::vector<std::string> summary_lines;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

struct BoundRow {
  std::string name;
  long long n = 0;
  double threshold = 0.0;
  double bound = 0.0;
  double empirical = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool pass = true;
};

inline void write_bounds_csv(std::ostream& os, std::span<const BoundRow> rows) {
  os << "bound,n,threshold,bound_value,empirical,ci_lo,ci_hi,pass\n";
  os << std::setprecision(12);
  for (const auto& r : rows)
    os << r.name << ',' << r.n << ',' << r.threshold << ',' << r.bound << ',' << r.empirical << ','
       << r.ci_lo << ',' << r.ci_hi << ',' << (r.pass ? 1 : 0) << '\n';
}

inline void write_fit_csv(std::ostream& os,
                          std::span<const std::tuple<std::string, RateCorrection, RateFit>> fits) {
  os << "metric,correction,slope,stderr\n";
  os << std::setprecision(12);
  for (const auto& [metric, corr, fit] : fits)
    os << metric << ',' << to_string(corr) << ',' << fit.slope << ',' << fit.stderr_slope << '\n';
}

// ---------------------------------------------------------------------------
// bound-validation batteries (plain iid sampling; the statistics depend only
// on the marginal laws)

// sup_{t in [0,1]} | A_n(t)/n - p t | for uniform arrival epochs; exact
// (the sup of a step-vs-line gap sits at a jump, one side or the other).
inline double arrival_fluid_gap(std::span<const double> accepted_sorted, long long n, double p) {
  double nd = static_cast<double>(n);
  double best = p;  // t = 1 with no arrivals
  long long k = 0;
  for (double t : accepted_sorted) {
    best = std::max(best, std::abs(static_cast<double>(k) / nd - p * t));
    ++k;
    best = std::max(best, std::abs(static_cast<double>(k) / nd - p * t));
  }
  best = std::max(best, std::abs(static_cast<double>(k) / nd - p));
  return best;
}

// sup_t | M_n(t)/n - (cn t/(n mu)) ^ 1 |, exact at the renewal jumps plus
// the fluid saturation point.
inline double renewal_fluid_gap(std::span<const double> services, double cn, double mu) {
  long long n = static_cast<long long>(services.size());
  double nd = static_cast<double>(n);
  auto xi = [&](double t) { return std::min(cn * t / (nd * mu), 1.0); };
  double best = 0.0;
  double acc = 0.0;
  long long k = 0;
  for (double v : services) {
    acc += v;
    double t = acc / cn;  // M jumps to k+1 here
    best = std::max(best, std::abs(static_cast<double>(k) / nd - xi(t)));
    ++k;
    best = std::max(best, std::abs(static_cast<double>(k) / nd - xi(t)));
  }
  best = std::max(best, std::abs(1.0 - xi(nd * mu / cn)));
  return best;
}

struct BoundValidationResult {
  std::vector<BoundRow> rows;
  std::vector<CheckResult> checks;
  Assumption43Fit arrival_fit;
  Assumption43Fit renewal_fit;
};

inline BoundValidationResult validate_bounds(const ExperimentConfig& cfg) {
  BoundValidationResult out;
  DistributionSpec service = parse_family(cfg.service);

  // Lemma 4.4 against gamma-style partial-sum maxima, n = 100, 1e4 reps
  {
    const long long n = 100;
    const int reps = 10000;
    SubExpParams pr = subexp_params(service);
    std::vector<double> stats(reps);
    parallel_for(cfg.jobs, static_cast<std::size_t>(reps), [&](std::size_t r) {
      RngStream rng = StreamFactory{cfg.seed, 1001, static_cast<std::uint64_t>(r)}.make(StreamRole::Generic);
      double acc = 0.0, best = 0.0;
      for (long long k = 1; k <= n; ++k) {
        acc += quantile(service, rng.u01()) - service.mean;
        best = std::max(best, std::abs(acc));
      }
      stats[r] = best;
    });
    bool all = true;
    for (double x : {0.5, 1.0, 1.5, 2.0, 3.0, 4.5, 6.0, 8.0}) {
      double t = pr.nu * std::sqrt(2.0 * x / static_cast<double>(n));
      double bound = subexp_tail_bound(pr, n, t);
      DominationCheck c = check_domination(stats, static_cast<double>(n) * t, bound);
      all = all && c.pass;
      out.rows.push_back({"subexp-max", n, c.threshold, bound, c.empirical.estimate,
                          c.empirical.ci_lo, c.empirical.ci_hi, c.pass});
    }
    out.checks.push_back({"subexp-domination", all, "two-regime bound vs partial-sum maxima"});
  }

  // classical DKW at n = 100, 1e4 reps
  {
    const long long n = 100;
    const int reps = 10000;
    std::vector<double> stats(reps);
    parallel_for(cfg.jobs, static_cast<std::size_t>(reps), [&](std::size_t r) {
      RngStream rng = StreamFactory{cfg.seed, 1002, static_cast<std::uint64_t>(r)}.make(StreamRole::Generic);
      std::vector<double> u(n);
      for (auto& x : u) x = rng.u01();
      stats[r] = sup_cdf_distance(EmpiricalCdf(std::move(u)), uniform01());
    });
    bool all = true;
    for (double eps : {0.05, 0.08, 0.10, 0.12, 0.15, 0.20}) {
      double bound = classical_dkw_bound(n, eps);
      DominationCheck c = check_domination(stats, eps, bound);
      all = all && c.pass;
      out.rows.push_back({"dkw-classical", n, eps, bound, c.empirical.estimate, c.empirical.ci_lo,
                          c.empirical.ci_hi, c.pass});
    }
    out.checks.push_back({"dkw-domination", all, "2 exp(-2 n eps^2) vs sup|G_n - G|"});
  }

  // fitted DKW-style inequalities for the arrival and renewal fluid gaps
  {
    validate_ladder(cfg);
    const int reps = cfg.replications;
    std::map<long long, std::vector<double>> arrival_stats, renewal_stats;
    for (long long n : cfg.ladder) {
      auto& astats = arrival_stats[n];
      auto& rstats = renewal_stats[n];
      astats.resize(reps);
      rstats.resize(reps);
      double cn = cn_value(cfg, n, service.mean);
      parallel_for(cfg.jobs, static_cast<std::size_t>(reps), [&, n, cn](std::size_t r) {
        RngStream rng = StreamFactory{cfg.seed, static_cast<std::uint64_t>(n) * 7 + 1003,
                                      static_cast<std::uint64_t>(r)}
                            .make(StreamRole::Generic);
        std::vector<double> accepted;
        accepted.reserve(static_cast<std::size_t>(n));
        for (long long i = 0; i < n; ++i) {
          double t = rng.u01();  // uniform01 arrival epochs
          if (rng.u01() < cfg.p) accepted.push_back(t);
        }
        std::sort(accepted.begin(), accepted.end());
        astats[r] = arrival_fluid_gap(accepted, n, cfg.p);
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = quantile(service, rng.u01());
        rstats[r] = renewal_fluid_gap(v, cn, service.mean);
      });
    }

    auto run_battery = [&](const std::string& name, std::map<long long, std::vector<double>>& stats,
                           double shift_scale, Assumption43Fit& fit_out) {
      // probe thresholds at fixed per-n quantile levels of the observed stats
      std::vector<TailPoint> fit_pts, all_pts;
      for (auto& [n, v] : stats) {
        double shift = shift_scale / static_cast<double>(n);
        for (double q : {0.5, 0.75, 0.9, 0.97}) {
          double eps = quantile_of(v, q) - shift;
          if (eps <= 0.0) continue;
          auto est = empirical_exceedance(v, eps + shift);
          TailPoint pt{n, eps, est.estimate};
          all_pts.push_back(pt);
        }
      }
      long long fit_cutoff = cfg.ladder[(cfg.ladder.size() - 1) / 2];
      for (const auto& pt : all_pts)
        if (pt.n <= fit_cutoff) fit_pts.push_back(pt);
      Assumption43Fit fit = fit_assumption43(fit_pts, 1.0);
      fit_out = fit;
      bool all = true;
      for (const auto& pt : all_pts) {
        double bound = fit.bound(pt.n, pt.eps);
        DominationCheck c =
            check_domination(stats[pt.n], pt.eps + shift_scale / static_cast<double>(pt.n), bound);
        all = all && c.pass;
        out.rows.push_back({name, pt.n, pt.eps, bound, c.empirical.estimate, c.empirical.ci_lo,
                            c.empirical.ci_hi, c.pass});
      }
      std::ostringstream det;
      det << "fitted k1=" << fit.k1 << " k2=" << fit.k2 << " k3=" << fit.k3
          << " (fit on n <= " << fit_cutoff << ", checked on the full ladder)";
      out.checks.push_back({name + "-fitted-inequality", all, det.str()});
    };

    run_battery("prop-arrival-fluid", arrival_stats, 0.0, out.arrival_fit);
    run_battery("prop-renewal-fluid", renewal_stats, 2.0, out.renewal_fit);
  }
  return out;
}

// ---------------------------------------------------------------------------
// experiment driver

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& contents) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot open output file " + p.string());
  os << contents;
}

}  // namespace detail

inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  ExperimentOutcome out;
  fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());

  auto summary = [&](const std::string& line) { out.summary_lines.push_back(line); };
  summary("kind = " + cfg.kind);

  if (cfg.kind == "simulate-only") {
    long long n = cfg.n_single > 0 ? cfg.n_single : cfg.ladder.front();
    std::ostringstream rows;
    write_trace_summary_header(rows);
    for (int rep = 0; rep < cfg.replications; ++rep) {
      CoupledSampleConfig sc = sample_config(cfg, n, rep);
      CoupledSample sample = build_coupled_sample(sc);
      double cn = cn_value(cfg, n, sc.service.mean);
      QueueInputs inputs{n, cfg.p, sample.arrival_law, sc.service, cn};
      QueueTrace tr = simulate(inputs, sample);
      write_trace_summary_row(rows, inputs, tr);
      if (rep == 0) {
        auto dump = [&](const char* name, const GridPath& p) {
          std::ostringstream os;
          p.write_csv(os);
          detail::write_file(dir / name, os.str());
        };
        dump("arrivals.csv", tr.arrivals);
        dump("workload.csv", tr.workload);
        dump("queue_length.csv", tr.queue_length);
        dump("busy_time.csv", tr.busy_time);
        dump("idle_time.csv", tr.idle_time);
        dump("completions.csv", tr.completions);
        dump("remaining_workload.csv", remaining_workload(tr, cn));
        std::ostringstream sample_csv;
        sample.write_csv(sample_csv);
        detail::write_file(dir / "sample.csv", sample_csv.str());
      }
    }
    detail::write_file(dir / "trace_summary.csv", rows.str());
    summary("simulated n=" + std::to_string(n) + " x " + std::to_string(cfg.replications) +
            " replications");
  } else if (cfg.kind == "kmt-empirical") {
    validate_ladder(cfg);
    std::size_t reps = static_cast<std::size_t>(cfg.replications);
    std::vector<LadderRecord> records(cfg.ladder.size() * reps);
    for (std::size_t li = 0; li < cfg.ladder.size(); ++li) {
      long long n = cfg.ladder[li];
      parallel_for(cfg.jobs, reps, [&, li, n](std::size_t rep) {
        auto t0 = std::chrono::steady_clock::now();
        double stat = kmt_empirical_statistic(n, cfg.seed, static_cast<int>(rep), cfg.delta_cells);
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        records[li * reps + rep] =
            LadderRecord{n, static_cast<int>(rep), "kmt_empirical", stat, ms, cfg.seed};
      });
    }
    out.records = std::move(records);
    std::map<long long, double> med = median_errors(out.records, "kmt_empirical");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& [n, m] : med) {
      double ratio = m / std::log(static_cast<double>(n));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      std::ostringstream line;
      line << "m(" << n << ") = " << m << ", m/log n = " << ratio;
      summary(line.str());
    }
    std::ostringstream det;
    det << "max ratio " << hi << " vs 4 x min ratio " << 4.0 * lo;
    out.checks.push_back({"kmt-empirical-log-rate", hi <= 4.0 * lo, det.str()});
  } else if (cfg.kind == "validate-bounds") {
    BoundValidationResult res = validate_bounds(cfg);
    std::ostringstream bounds_csv;
    write_bounds_csv(bounds_csv, res.rows);
    detail::write_file(dir / "bounds.csv", bounds_csv.str());
    out.checks = res.checks;
    for (const auto& c : out.checks)
      summary(c.name + ": " + (c.pass ? "PASS" : "FAIL") + " (" + c.detail + ")");
  } else {  // coupling ladders
    validate_ladder(cfg);
    std::vector<std::string> metrics = metrics_for_kind(cfg.kind);
    std::size_t per_rep = metrics.size();
    std::size_t reps = static_cast<std::size_t>(cfg.replications);
    std::vector<LadderRecord> records(cfg.ladder.size() * reps * per_rep);
    for (std::size_t li = 0; li < cfg.ladder.size(); ++li) {
      long long n = cfg.ladder[li];
      parallel_for(cfg.jobs, reps, [&, li, n](std::size_t rep) {
        ReplicationOutput r = run_coupled_replication(cfg, n, static_cast<int>(rep));
        std::size_t base = (li * reps + rep) * per_rep;
        for (std::size_t m = 0; m < per_rep; ++m) records[base + m] = r.records[m];
        if (li == 0 && rep == 0) {
          auto dump = [&](const char* name, const GridPath& p) {
            std::ostringstream os;
            p.write_csv(os);
            detail::write_file(dir / name, os.str());
          };
          dump("first_rep_arrivals.csv", r.trace.arrivals);
          dump("first_rep_H.csv", r.approx.H);
        }
      });
    }
    out.records = std::move(records);

    std::vector<std::tuple<std::string, RateCorrection, RateFit>> fits;
    for (const std::string& metric : metrics) {
      for (RateCorrection corr :
           {RateCorrection::SqrtLogN, RateCorrection::LogN, RateCorrection::None}) {
        RateFit fit = fit_rate(out.records, metric, corr);
        fits.emplace_back(metric, corr, fit);
        std::ostringstream line;
        line << metric << " [" << to_string(corr) << "]: slope = " << fit.slope
             << " +/- " << fit.stderr_slope;
        summary(line.str());
      }
      if (cfg.rate_checks) {
        RateFit fit = fit_rate(out.records, metric, RateCorrection::SqrtLogN);
        double lo = metric == "queue_length" ? 0.12 : 0.15;
        double hi = metric == "queue_length" ? 0.40 : 0.35;
        std::ostringstream det;
        det << "slope " << fit.slope << " in [" << lo << ", " << hi << "]";
        out.checks.push_back({metric + "-rate", fit.slope >= lo && fit.slope <= hi, det.str()});
      }
    }
    std::ostringstream fit_csv;
    write_fit_csv(fit_csv, fits);
    detail::write_file(dir / "fit.csv", fit_csv.str());
  }

  if (!out.records.empty()) {
    std::ostringstream rec_csv;
    write_records_csv(rec_csv, out.records);
    detail::write_file(dir / "records.csv", rec_csv.str());
  }
  for (const auto& c : out.checks)
    summary(std::string(c.pass ? "PASS" : "FAIL") + " " + c.name + ": " + c.detail);
  std::ostringstream sum;
  for (const auto& line : out.summary_lines) sum << line << '\n';
  detail::write_file(dir / "summary.txt", sum.str());
  return out;
}

}  // namespace transq
