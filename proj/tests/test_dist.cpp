#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "transq/bounds.hpp"
#include "transq/distributions.hpp"
#include "transq/rng.hpp"

using namespace transq;

TEST_CASE("cdf evaluation per family", "[dist]") {
  CHECK(cdf(uniform01(), 0.3) == Catch::Approx(0.3));
  CHECK(cdf(exponential(1.0), 0.0) == 0.0);
  // closed-form lower incomplete gamma: 1 - 2 e^{-1}
  CHECK(cdf(gamma_dist(2.0, 1.0), 1.0) == Catch::Approx(1.0 - 2.0 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(cdf(bernoulli(0.3), 0.5) == Catch::Approx(0.7));
  CHECK(cdf(gaussian(0.0, 1.0), 0.0) == Catch::Approx(0.5));
}

TEST_CASE("quantile follows the sup convention", "[dist]") {
  CHECK(quantile(uniform01(), 0.25) == Catch::Approx(0.25));
  CHECK(quantile(exponential(1.0), 1.0 - std::exp(-1.0)) == Catch::Approx(1.0).epsilon(1e-12));
  // flat stretch at level 0.5 on [1,2]: sup convention picks the right end
  DistributionSpec table = cdf_table({0.0, 1.0, 2.0, 3.0}, {0.0, 0.5, 0.5, 1.0});
  CHECK(quantile(table, 0.5) == Catch::Approx(2.0));
  CHECK(quantile(table, 0.25) == Catch::Approx(0.5));
  // u = 1 on unbounded support requires a configured truncation horizon
  DistributionSpec exp_free = exponential(1.0);
  CHECK_THROWS_AS(quantile(exp_free, 1.0), std::invalid_argument);
  DistributionSpec exp_trunc = exponential(1.0);
  exp_trunc.truncate_at = 40.0;
  CHECK(quantile(exp_trunc, 1.0) == 40.0);
  CHECK(truncated_mass(exp_trunc) == Catch::Approx(std::exp(-40.0)));
}

TEST_CASE("Galois property on a grid per family", "[dist]") {
  std::vector<DistributionSpec> specs{uniform01(), exponential(1.3), gamma_dist(2.0, 1.0),
                                      gaussian(0.5, 2.0)};
  for (const auto& spec : specs) {
    for (double u : {0.05, 0.21, 0.5, 0.77, 0.93}) {
      double q = quantile(spec, u);
      for (double x : {q - 1.0, q - 1e-6, q, q + 1e-6, q + 1.0}) {
        bool lhs = cdf(spec, x) <= u;
        bool rhs = x <= q;
        // the equivalence G(x) <= u iff x <= G^{-1}(u); floating point can
        // flip only within one ulp of the boundary
        if (std::abs(x - q) > 1e-9) REQUIRE(lhs == rhs);
      }
      // strictly increasing G: G^{-1}(G(s)) = s
      REQUIRE(quantile(spec, cdf(spec, q)) == Catch::Approx(q).margin(1e-8));
    }
  }
}

TEST_CASE("empirical cdf counts indicators", "[dist]") {
  EmpiricalCdf f = empirical_cdf({0.2, 0.5});
  CHECK(f.at(0.3) == 0.5);
  CHECK(f.at(0.1) == 0.0);
  CHECK(f.at(0.5) == 1.0);
  CHECK(f.left_limit(0.5) == 0.5);
  // total jump mass is exactly 1
  CHECK(f.at(f.sorted_samples().back()) == 1.0);

  RngStream rng(42);
  std::vector<double> xs(100);
  for (auto& x : xs) x = rng.uniform(-2.0, 2.0);
  EmpiricalCdf g = empirical_cdf(xs);
  for (int k = 0; k < 50; ++k) {
    double probe = rng.uniform(-2.5, 2.5);
    int cnt = 0;
    for (double x : xs) cnt += x <= probe;
    REQUIRE(g.at(probe) == Catch::Approx(cnt / 100.0));
  }
}

TEST_CASE("sup cdf distance", "[dist]") {
  EmpiricalCdf a = empirical_cdf({0.1, 0.4, 0.9});
  CHECK(sup_cdf_distance(a, a) == 0.0);
  EmpiricalCdf atom = empirical_cdf({0.5});
  CHECK(sup_cdf_distance(atom, uniform01()) == Catch::Approx(0.5));
}

TEST_CASE("classic DKW simulation at n=100", "[dist][mc]") {
  const long long n = 100;
  const int reps = 10000;
  const double eps = 0.15;
  std::vector<double> stats(reps);
  for (int r = 0; r < reps; ++r) {
    RngStream rng(mix_keys({606, static_cast<std::uint64_t>(r)}));
    std::vector<double> u(n);
    for (auto& x : u) x = rng.u01();
    stats[r] = sup_cdf_distance(EmpiricalCdf(std::move(u)), uniform01());
  }
  double bound = classical_dkw_bound(n, eps);
  auto check = check_domination(stats, eps, bound);
  CHECK(check.pass);
}

TEST_CASE("built-in mixture family realizes r_n = a sup|Gt-G| / sqrt(n)", "[dist]") {
  DistributionSpec g = uniform01();
  DistributionSpec gt = cdf_table({0.0, 0.3, 1.0}, {0.0, 0.75, 1.0});
  const long long n = 64;
  const double a = 0.5;
  DistributionSpec gn = mixture_gn(g, gt, a, n);
  double expected = a / std::sqrt(static_cast<double>(n)) * sup_cdf_distance(gt, g);
  CHECK(sup_cdf_distance(gn, g) == Catch::Approx(expected).margin(1e-3));
  // mixture cdf and quantile invert each other
  for (double u : {0.1, 0.45, 0.8}) {
    double q = quantile(gn, u);
    REQUIRE(cdf(gn, q) == Catch::Approx(u).margin(1e-10));
  }
  // weight a/sqrt(n) keeps the Lipschitz constant bounded in n
  REQUIRE(gn.cdf_lipschitz.has_value());
  CHECK(*gn.cdf_lipschitz <= std::max(*g.cdf_lipschitz, 0.75 / 0.3) + 1e-12);
}

TEST_CASE("cdf tables load from CSV", "[dist]") {
  std::istringstream in("t,G\n0,0\n1,0.25\n4,1\n");
  DistributionSpec spec = load_cdf_table(in);
  CHECK(cdf(spec, 1.0) == Catch::Approx(0.25));
  CHECK(cdf(spec, 2.5) == Catch::Approx(0.625));
  CHECK(spec.mean == Catch::Approx(0.25 * 0.5 + 0.75 * 2.5));
  CHECK_THROWS_AS(cdf_table({0.0, 1.0}, {0.0, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(cdf_table({0.0, 0.0}, {0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("exp_abs_moment matches quadrature", "[dist]") {
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto oracle = [&](const DistributionSpec& spec, double s, double lo, double hi,
                    auto&& pdf) {
    return integrator.integrate(
        [&](double x) { return pdf(x) * std::exp(s * std::abs(x - spec.mean)); }, lo, hi);
  };

  DistributionSpec g21 = gamma_dist(2.0, 1.0);
  auto gamma_pdf = [](double x) { return x * std::exp(-x); };
  for (double s : {0.1, 0.5, 0.9}) {
    double exact = exp_abs_moment(g21, s);
    double quad = oracle(g21, s, 0.0, 60.0, gamma_pdf);
    REQUIRE(exact == Catch::Approx(quad).epsilon(1e-8));
  }
  CHECK(std::isinf(exp_abs_moment(g21, 1.5)));

  DistributionSpec uni = uniform01();
  auto uni_pdf = [](double) { return 1.0; };
  for (double s : {0.2, 1.0, 3.0})
    REQUIRE(exp_abs_moment(uni, s) == Catch::Approx(oracle(uni, s, 0.0, 1.0, uni_pdf)).epsilon(1e-10));

  DistributionSpec gau = gaussian(1.0, 2.0);
  auto gau_pdf = [](double x) {
    return std::exp(-0.5 * (x - 1.0) * (x - 1.0) / 4.0) / (2.0 * std::sqrt(2.0 * 3.14159265358979323846));
  };
  for (double s : {0.2, 0.7})
    REQUIRE(exp_abs_moment(gau, s) ==
            Catch::Approx(oracle(gau, s, -30.0, 30.0, gau_pdf)).epsilon(1e-8));

  // bernoulli closed form by direct enumeration
  DistributionSpec ber = bernoulli(0.3);
  double s = 0.8;
  double direct = 0.3 * std::exp(s * 0.7) + 0.7 * std::exp(s * 0.3);
  CHECK(exp_abs_moment(ber, s) == Catch::Approx(direct).epsilon(1e-14));
}
