#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "transq/approx.hpp"
#include "transq/harness.hpp"

using namespace transq;

namespace {

CoupledSample sample_for(long long n, double p, std::uint64_t seed,
                         DistributionSpec service = gamma_dist(2.0, 1.0)) {
  CoupledSampleConfig cfg;
  cfg.n = n;
  cfg.p = p;
  cfg.arrival_limit = uniform01();
  cfg.service = std::move(service);
  cfg.streams = StreamFactory{seed, static_cast<std::uint64_t>(n), 0};
  return build_coupled_sample(cfg);
}

std::vector<double> unit_grid(int cells, double hi = 1.0) {
  std::vector<double> g(cells + 1);
  for (int i = 0; i <= cells; ++i) g[i] = hi * static_cast<double>(i) / cells;
  return g;
}

}  // namespace

TEST_CASE("H reduces to n t + sqrt(n) bridge for p=1, uniform G", "[approx]") {
  const long long n = 64;
  auto s = sample_for(n, 1.0, 11);
  std::vector<double> grid = unit_grid(100, 2.0);
  ApproxParams pr{n, 1.0, 2.0, std::sqrt(2.0), 1.0, AssumptionBranch::Stationary, 0.0};
  BrownianBridge br = s.bridge();
  GridPath H = build_H(br, s.bm_dropout, s.arrival_limit, pr, grid);
  for (std::size_t i = 0; i < H.size(); ++i) {
    double t = H.knots()[i];
    double g = std::min(t, 1.0);
    double expected = static_cast<double>(n) * g + 8.0 * br.at(g);
    REQUIRE(H.values()[i] == Catch::Approx(expected).margin(1e-10));
  }
  // beyond the support H is exactly np (bridge pinned at 0 for p=1)
  CHECK(H.at(1.7) == Catch::Approx(static_cast<double>(n)).margin(1e-10));
}

TEST_CASE("approximants recompute from cached drivers", "[approx]") {
  const long long n = 128;
  const double p = 0.7, mu = 2.0, sigma = std::sqrt(2.0), cn = 0.9 * n;
  auto s = sample_for(n, p, 12);
  std::vector<double> grid = unit_grid(100, 2.5);
  ApproxParams pr{n, p, mu, sigma, cn, AssumptionBranch::Stationary, 0.0};
  BrownianBridge br = s.bridge();
  GridPath H = build_H(br, s.bm_dropout, s.arrival_limit, pr, grid);
  GridPath R = build_R(H, s.bm_service, s.arrival_limit, pr);
  GridPath Et = build_Etilde(s.arrival_limit, pr, grid);
  GridPath E = build_E(Et, pr);
  GridPath X = build_X(H, s.bm_service, E, pr);

  double rootn = std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < H.size(); ++i) {
    double t = H.knots()[i];
    double g = cdf(s.arrival_limit, t);
    double h = n * p * g + rootn * (p * br.at(g) + std::sqrt(p * (1 - p)) * s.bm_dropout.at(g));
    REQUIRE(H.values()[i] == Catch::Approx(h).margin(1e-12 * n));
    REQUIRE(R.values()[i] ==
            Catch::Approx(rootn * sigma * s.bm_service.at(p * g) + mu * h).margin(1e-12 * n));
    // E is the drift plus the running infimum of Etilde
    double inf = Et.values()[0];
    for (std::size_t j = 0; j <= i; ++j) inf = std::min(inf, Et.values()[j]);
    double e = cn * t / (n * mu) + inf;
    REQUIRE(E.values()[i] == Catch::Approx(e).margin(1e-12));
    REQUIRE(X.values()[i] ==
            Catch::Approx(h - cn * t / mu + rootn * (sigma / mu) * s.bm_service.at(E.values()[i]))
                .margin(1e-12 * n));
  }
}

TEST_CASE("critical load on uniform G gives E(t) = p t", "[approx]") {
  const long long n = 64;
  const double p = 0.7, mu = 2.0;
  ApproxParams pr{n, p, mu, 1.0, n * mu * p, AssumptionBranch::Stationary, 0.0};
  std::vector<double> grid = unit_grid(50);
  GridPath Et = build_Etilde(uniform01(), pr, grid);
  GridPath E = build_E(Et, pr);
  for (std::size_t i = 0; i < E.size(); ++i)
    REQUIRE(E.values()[i] == Catch::Approx(p * E.knots()[i]).margin(1e-12));
  CHECK(E.values().front() == 0.0);
}

TEST_CASE("grid infimum is within Lipschitz resolution of a finer one", "[approx]") {
  const long long n = 64;
  ApproxParams pr{n, 0.7, 2.0, 1.0, 80.0, AssumptionBranch::Stationary, 0.0};
  std::vector<double> coarse = unit_grid(128, 2.0), fine = unit_grid(1280, 2.0);
  GridPath e_coarse = build_E(build_Etilde(uniform01(), pr, coarse), pr);
  GridPath e_fine = build_E(build_Etilde(uniform01(), pr, fine), pr);
  double lipschitz = 0.7 * 1.0 + 80.0 / (64.0 * 2.0);  // p L_G + cn/(n mu)
  double step = 2.0 / 128.0;
  for (std::size_t i = 0; i < e_coarse.size(); ++i) {
    double diff = std::abs(e_coarse.values()[i] - e_fine.at(e_coarse.knots()[i]));
    REQUIRE(diff <= lipschitz * step + 1e-12);
  }
}

TEST_CASE("sigma = 0 collapses the service noise", "[approx]") {
  const long long n = 32;
  auto s = sample_for(n, 0.5, 13, gaussian(2.0, 0.0));
  std::vector<double> grid = unit_grid(64, 2.0);
  ApproxParams pr{n, 0.5, 2.0, 0.0, 20.0, AssumptionBranch::Stationary, 0.0};
  BrownianBridge br = s.bridge();
  GridPath H = build_H(br, s.bm_dropout, s.arrival_limit, pr, grid);
  GridPath R = build_R(H, s.bm_service, s.arrival_limit, pr);
  GridPath E = build_E(build_Etilde(s.arrival_limit, pr, grid), pr);
  GridPath X = build_X(H, s.bm_service, E, pr);
  for (std::size_t i = 0; i < H.size(); ++i) {
    REQUIRE(R.values()[i] == Catch::Approx(2.0 * H.values()[i]).margin(1e-12));
    REQUIRE(X.values()[i] ==
            Catch::Approx(H.values()[i] - 20.0 * H.knots()[i] / 2.0).margin(1e-12));
  }
}

TEST_CASE("scaling identity sqrt(n) Yhat = X on the shared grid", "[approx]") {
  const long long n = 64;
  auto s = sample_for(n, 0.7, 14);
  double cn = static_cast<double>(n) * 2.0 * 0.7;
  std::vector<double> grid = unit_grid(256, 2.5);
  ApproximantSet a = build_approximants(s, cn, grid);
  double rootn = std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < a.X.size(); ++i)
    REQUIRE(rootn * a.Yhat.values()[i] == Catch::Approx(a.X.values()[i]).margin(1e-10));
  // X(0) = 0 and the reflected approximant starts at 0 and stays nonnegative
  CHECK(a.X.values().front() == Catch::Approx(0.0).margin(1e-12));
  GridPath phi = approx_queue_length(a.X);
  CHECK(phi.values().front() == Catch::Approx(0.0).margin(1e-12));
  for (double v : phi.values()) REQUIRE(v >= 0.0);
  // Hhat is H / sqrt(n) pointwise
  for (std::size_t i = 0; i < a.H.size(); ++i)
    REQUIRE(a.Hhat.values()[i] * rootn == Catch::Approx(a.H.values()[i]).margin(1e-10));
}

TEST_CASE("approximants share the sample's driver objects", "[approx]") {
  auto s = sample_for(16, 0.7, 15);
  std::vector<double> grid = unit_grid(32, 2.0);
  ApproximantSet a = build_approximants(s, 20.0, grid);
  CHECK(a.bridge_driver == &s.bridge_motion);
  CHECK(a.dropout_driver == &s.bm_dropout);
  CHECK(a.service_driver == &s.bm_service);
  // rebuilt from the same sample, every value replays from the caches
  ApproximantSet b = build_approximants(s, 20.0, grid);
  CHECK(a.H.values() == b.H.values());
  CHECK(a.X.values() == b.X.values());
}

TEST_CASE("varying-law branch with r_n = 0 reduces to the stationary formulas", "[approx]") {
  CoupledSampleConfig cfg;
  cfg.n = 32;
  cfg.p = 0.6;
  cfg.arrival_limit = uniform01();
  cfg.service = gamma_dist(2.0, 1.0);
  cfg.streams = StreamFactory{77, 32, 0};
  cfg.branch = AssumptionBranch::VaryingLaw;
  cfg.arrival_tilt = uniform01();
  cfg.mixture_coeff = 0.0;
  auto s_vary = build_coupled_sample(cfg);

  CoupledSampleConfig plain = cfg;
  plain.branch = AssumptionBranch::Stationary;
  plain.arrival_tilt.reset();
  auto s_plain = build_coupled_sample(plain);

  std::vector<double> grid = unit_grid(64, 2.0);
  ApproximantSet a = build_approximants(s_vary, 30.0, grid);
  ApproximantSet b = build_approximants(s_plain, 30.0, grid);
  CHECK(a.H.values() == b.H.values());
  CHECK(a.E.values() == b.E.values());
  CHECK(a.X.values() == b.X.values());
}

TEST_CASE("H variance matches the bridge/motion decomposition", "[approx][mc]") {
  const long long n = 64;
  const double p = 0.7, t = 0.5;
  const int reps = 4000;
  double s1 = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    auto s = sample_for(n, p, mix_keys({9090, static_cast<std::uint64_t>(r)}));
    std::vector<double> grid{0.0, t};
    ApproxParams pr{n, p, 2.0, std::sqrt(2.0), 1.0, AssumptionBranch::Stationary, 0.0};
    BrownianBridge br = s.bridge();
    GridPath H = build_H(br, s.bm_dropout, s.arrival_limit, pr, grid);
    double v = H.values()[1];
    s1 += v;
    s2 += v * v;
  }
  double mean = s1 / reps;
  double var = s2 / reps - mean * mean;
  double g = t;  // uniform01 cdf
  double expected = n * (p * p * g * (1 - g) + p * (1 - p) * g);
  CHECK(var == Catch::Approx(expected).epsilon(0.10));
}
