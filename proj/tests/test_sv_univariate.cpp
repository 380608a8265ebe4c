#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "factorsv/sv_univariate.hpp"
#include "support/geweke.hpp"
#include "support/stats.hpp"

using namespace fsv;
using namespace testsupport;

TEST_CASE("sv_stationary_init: moments of the stationary law") {
  {
    Rng rng(1, 1);
    std::vector<double> draws;
    for (int k = 0; k < 1000000; ++k)
      draws.push_back(sv_stationary_init(rng, SvParams{0.0, 0.0, 1.0}, false));
    CHECK(mean_of(draws) == doctest::Approx(0.0).epsilon(0.01));
    CHECK(variance_of(draws) == doctest::Approx(1.0).epsilon(0.01));
  }
  {
    Rng rng(1, 2);
    std::vector<double> draws;
    for (int k = 0; k < 1000000; ++k)
      draws.push_back(sv_stationary_init(rng, SvParams{0.0, 0.9, 1.0}, false));
    CHECK(variance_of(draws) == doctest::Approx(1.0 / (1.0 - 0.81)).epsilon(0.02));
  }
  {
    Rng rng(1, 3);
    std::vector<double> draws;
    for (int k = 0; k < 1000000; ++k)
      draws.push_back(sv_stationary_init(rng, SvParams{-1.0, 0.5, 0.3}, true));
    CHECK(mean_of(draws) == doctest::Approx(-1.0).epsilon(0.01));
  }
  Rng rng(1, 4);
  CHECK_THROWS_AS(sv_stationary_init(rng, SvParams{0.0, 1.0, 1.0}, true), domain_error);
}

TEST_CASE("sv_update: contract and domain errors") {
  Rng rng(2, 1);
  SvUpdateWorkspace ws;
  SvBlock block;
  block.states = Vector::Zero(1);
  CHECK_THROWS_AS(sv_update(rng, Vector::Zero(0), block, SvPriors{}, ws), contract_error);
  block.states = Vector::Zero(4);
  Vector bad(3);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN(), 0.5;
  CHECK_THROWS_AS(sv_update(rng, bad, block, SvPriors{}, ws), domain_error);
}

TEST_CASE("sv_update: determinism and invariant preservation") {
  const SvPriors priors{0.0, 1.0, 10.0, 2.5, 1.0};
  Vector y(50);
  {
    Rng sim(2, 2);
    for (int t = 0; t < 50; ++t) y[t] = std::exp(0.5 * std::sin(t * 0.3)) * sim.normal();
  }
  SvBlock a, b;
  a.states = Vector::Zero(51);
  a.params = SvParams{0.2, 0.9, 0.2};
  b = a;
  Rng ra(3, 5), rb(3, 5);
  SvUpdateWorkspace wa, wb;
  for (int k = 0; k < 20; ++k) {
    sv_update(ra, y, a, priors, wa);
    sv_update(rb, y, b, priors, wb);
  }
  CHECK(a.states == b.states);
  CHECK(a.params.mu == b.params.mu);
  CHECK(a.params.phi == b.params.phi);
  CHECK(a.params.sigma == b.params.sigma);

  // invariants across many sweeps with varied data
  Rng rng(3, 6);
  SvBlock block;
  block.states = Vector::Zero(51);
  block.params = SvParams{0.0, 0.5, 0.5};
  SvUpdateWorkspace ws;
  bool ok = true;
  for (int k = 0; k < 300; ++k) {
    sv_update(rng, y, block, priors, ws);
    ok = ok && std::abs(block.params.phi) < 1.0 && block.params.sigma > 0.0 &&
         block.states.allFinite();
  }
  CHECK(ok);
}

TEST_CASE("sv_update: factor blocks keep mu pinned at zero") {
  const SvPriors priors{0.0, 1.0, 2.5, 2.5, 1.0};
  Vector y(40);
  {
    Rng sim(2, 7);
    for (int t = 0; t < 40; ++t) y[t] = sim.normal();
  }
  SvBlock block;
  block.has_level = false;
  block.states = Vector::Zero(41);
  block.params = SvParams{0.0, 0.8, 0.3};
  Rng rng(2, 8);
  SvUpdateWorkspace ws;
  bool mu_zero = true;
  for (int k = 0; k < 200; ++k) {
    sv_update(rng, y, block, priors, ws);
    mu_zero = mu_zero && block.params.mu == 0.0;
  }
  CHECK(mu_zero);
}

TEST_CASE("sv_update: zero observations are handled through the log offset") {
  const SvPriors priors{0.0, 1.0, 10.0, 2.5, 1.0};
  Vector y = Vector::Zero(30);  // all-zero series is permitted
  SvBlock block;
  block.states = Vector::Zero(31);
  block.params = SvParams{0.0, 0.9, 0.2};
  Rng rng(2, 9);
  SvUpdateWorkspace ws;
  for (int k = 0; k < 50; ++k) sv_update(rng, y, block, priors, ws);
  CHECK(block.states.allFinite());
}

TEST_CASE("sv_update: posterior recovers the simulating parameters" *
          doctest::timeout(300)) {
  const SvParams truth{-1.0, 0.95, 0.2};
  const int T = 1000;
  Rng sim(10, 1);
  Vector h(T + 1), y(T);
  h[0] = truth.mu + truth.sigma / std::sqrt(1.0 - truth.phi * truth.phi) * sim.normal();
  for (int t = 1; t <= T; ++t) {
    h[t] = truth.mu + truth.phi * (h[t - 1] - truth.mu) + truth.sigma * sim.normal();
    y[t - 1] = std::exp(0.5 * h[t]) * sim.normal();
  }
  const SvPriors priors{0.0, 100.0, 10.0, 2.5, 1.0};
  SvBlock block;
  block.states = Vector::Zero(T + 1);
  block.params = SvParams{std::log(y.squaredNorm() / T), 0.9, 0.1};
  Rng rng(10, 2);
  SvUpdateWorkspace ws;
  const int n_draws = 11000, burn = 1000;
  std::vector<double> mu_draws, phi_draws, sigma_draws;
  for (int k = 0; k < n_draws; ++k) {
    sv_update(rng, y, block, priors, ws);
    if (k >= burn) {
      mu_draws.push_back(block.params.mu);
      phi_draws.push_back(block.params.phi);
      sigma_draws.push_back(block.params.sigma);
    }
  }
  auto check_within = [](const std::vector<double>& draws, double true_value) {
    const double m = mean_of(draws);
    const double sd = std::sqrt(variance_of(draws));
    CHECK(std::abs(m - true_value) < 3.0 * sd);
  };
  check_within(mu_draws, truth.mu);
  check_within(phi_draws, truth.phi);
  check_within(sigma_draws, truth.sigma);
}

TEST_CASE("sv_update: successive-conditional cycle preserves the prior mean of phi" *
          doctest::timeout(300)) {
  const SvPriors priors{0.0, 1.0, 10.0, 2.5, 1.0};
  const auto chain = sv_geweke_chain(77, 20, priors, true, 30000);
  // prior mean of (phi+1)/2 is a0/(a0+b0) = 0.8
  std::vector<double> half;
  half.reserve(chain.phi.size());
  for (double f : chain.phi) half.push_back(0.5 * (f + 1.0));
  CHECK(mean_of(half) == doctest::Approx(10.0 / 12.5).epsilon(0.012));
}
