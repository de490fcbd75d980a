#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "mel/convergence_bounds.hpp"
#include "mel/errors.hpp"

using namespace mel::bounds;

namespace {

// Valid draw with eta*beta <= 1 by construction.
ConvergenceParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double eta = 0.001 + 0.2 * uni(rng);
  const double eta_beta = 0.001 + 0.999 * uni(rng);
  const double beta = eta_beta / eta;
  const double delta = uni(rng) < 0.1 ? 0.0 : 2.0 * uni(rng);
  const double b0 = 0.001 + 0.05 * uni(rng);
  return ConvergenceParams(eta, beta, delta, b0);
}

// Independent route for the scan oracles: direct pow-based nu.
double nu_direct(const ConvergenceParams& p, double tau) {
  const double c_tau = std::pow(p.c_const, tau);
  return p.a_const -
         p.b_const * (c_tau - 1.0 - (p.c_const - 1.0) * tau) / tau;
}

}  // namespace

TEST_CASE("constructor enforces the parameter chain") {
  CHECK_THROWS_AS(ConvergenceParams(0.0, 1.0, 0.1, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(ConvergenceParams(0.01, 0.0, 0.1, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(ConvergenceParams(0.01, 1.0, -0.1, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(ConvergenceParams(0.01, 1.0, 0.1, 0.0), std::invalid_argument);
  // eta*beta > 1 is rejected; the boundary is accepted and gives C = 2.
  CHECK_THROWS_AS(ConvergenceParams(0.5, 2.1, 0.1, 0.01), std::invalid_argument);
  const ConvergenceParams boundary(0.5, 2.0, 0.1, 0.01);
  CHECK(boundary.c_const == doctest::Approx(2.0));

  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const ConvergenceParams p = random_params(rng);
    CHECK(p.c_const > 1.0);
    CHECK(p.c_const <= 2.0);
  }
}

TEST_CASE("h(1) is exactly zero") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const ConvergenceParams p = random_params(rng);
    CHECK(h_tau(p, 1.0) == 0.0);
  }
}

TEST_CASE("h at reference values") {
  const ConvergenceParams p(0.01, 1.0, 0.5, 0.01);
  // 0.5*(1.01^2 - 1) - 0.01*0.5*2 = 5e-5
  CHECK(h_tau(p, 2.0) == doctest::Approx(5.0e-5).epsilon(1e-9));
  CHECK_THROWS_AS(h_tau(p, 0.5), std::domain_error);

  const ConvergenceParams no_div(0.01, 1.0, 0.0, 0.01);
  for (const double tau : {1.0, 7.0, 123.0}) {
    CHECK(h_tau(no_div, tau) == 0.0);
  }
}

TEST_CASE("h is nonnegative with h/tau nondecreasing") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const ConvergenceParams p = random_params(rng);
    double prev_ratio = 0.0;
    for (int tau = 1; tau <= 500; ++tau) {
      const double h = h_tau(p, static_cast<double>(tau));
      REQUIRE(h >= 0.0);
      const double ratio = h / tau;
      REQUIRE(ratio >= prev_ratio - 1e-12 * std::max(1.0, ratio));
      prev_ratio = ratio;
      if (!std::isfinite(ratio)) break;
    }
  }
}

TEST_CASE("nu(1) equals A exactly and matches hand values") {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 1000; ++i) {
    const ConvergenceParams p = random_params(rng);
    CHECK(nu_tau(p, 1.0) == p.a_const);
  }
  const ConvergenceParams p(0.01, 1.0, 0.5, 0.01);
  CHECK(p.a_const == doctest::Approx(0.00995).epsilon(1e-12));
  CHECK(nu_tau(p, 2.0) == doctest::Approx(0.00994975).epsilon(1e-9));
}

TEST_CASE("nu closed form equals A - B0*h/tau") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 1000; ++i) {
    const ConvergenceParams p = random_params(rng);
    for (const double tau : {1.0, 2.0, 3.0, 10.0, 57.0, 256.0, 500.0}) {
      const double closed = nu_tau(p, tau);
      const double via_h = p.a_const - p.b0 * h_tau(p, tau) / tau;
      if (!std::isfinite(closed)) continue;
      CHECK(std::abs(closed - via_h) <=
            1e-12 * std::max({std::abs(closed), std::abs(via_h), p.a_const}));
    }
  }
}

TEST_CASE("P(tau) behaviour") {
  const ConvergenceParams p(0.01, 1.0, 0.5, 0.01);
  CHECK(p_tau(p, 1.0) == doctest::Approx(1.0 / p.a_const));

  // Nondecreasing on the feasible grid.
  double prev = 0.0;
  for (int tau = 1; tau <= 500; ++tau) {
    if (nu_tau(p, tau) <= 0.0) break;
    const double value = p_tau(p, tau);
    CHECK(value >= prev);
    prev = value;
  }

  const ConvergenceParams no_div(0.01, 1.0, 0.0, 0.01);
  for (const double tau : {1.0, 10.0, 400.0}) {
    CHECK(p_tau(no_div, tau) == doctest::Approx(1.0 / no_div.a_const));
  }

  // Far past the feasibility boundary the bound flips sign.
  CHECK_THROWS_AS(p_tau(p, 5000.0), mel::InfeasibleError);
}

TEST_CASE("feasible tau upper bound") {
  const ConvergenceParams no_div(0.01, 1.0, 0.0, 0.01);
  CHECK(feasible_tau_upper(no_div) == kUnboundedTau);

  const ConvergenceParams p(0.01, 1.0, 0.5, 0.01);
  const std::int64_t upper = feasible_tau_upper(p);
  // Independent scan with the direct pow formula.
  std::int64_t scan = 1;
  while (nu_direct(p, static_cast<double>(scan + 1)) > 0.0) ++scan;
  CHECK(upper == scan);
  CHECK(nu_tau(p, static_cast<double>(upper)) > 0.0);
  CHECK(nu_tau(p, static_cast<double>(upper + 1)) <= 0.0);

  // Raising B0 monotonically shrinks the bound.
  std::int64_t prev = upper;
  for (const double mult : {10.0, 100.0, 1000.0}) {
    const ConvergenceParams tighter(0.01, 1.0, 0.5, 0.01 * mult);
    const std::int64_t u = feasible_tau_upper(tighter);
    CHECK(u <= prev);
    prev = u;
  }
}

TEST_CASE("real-valued tau extension interleaves the integer lattice") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 200; ++i) {
    const ConvergenceParams p = random_params(rng);
    if (p.delta == 0.0) continue;
    for (const double tau : {1.5, 2.5, 7.25, 63.8}) {
      const double below = h_tau(p, std::floor(tau));
      const double above = h_tau(p, std::ceil(tau));
      const double mid = h_tau(p, tau);
      CHECK(mid >= below - 1e-12 * std::max(1.0, std::abs(below)));
      CHECK(mid <= above + 1e-12 * std::max(1.0, std::abs(above)));
      // The nu identity holds off the integer lattice too.
      const double closed = nu_tau(p, tau);
      const double via_h = p.a_const - p.b0 * h_tau(p, tau) / tau;
      CHECK(std::abs(closed - via_h) <=
            1e-12 * std::max({std::abs(closed), std::abs(via_h), p.a_const}));
    }
    // Real and integer paths agree where they meet.
    for (const double tau : {2.0, 10.0, 100.0}) {
      const double exact = h_tau(p, tau);
      const double real_path = h_tau(p, tau + 1e-9);
      if (!std::isfinite(exact)) continue;
      CHECK(real_path ==
            doctest::Approx(exact).epsilon(1e-6).scale(std::max(1.0, exact)));
    }
  }
}

TEST_CASE("feasible tau upper bound across random params") {
  std::mt19937_64 rng(55);
  for (int i = 0; i < 100; ++i) {
    const ConvergenceParams p = random_params(rng);
    const std::int64_t upper = feasible_tau_upper(p);
    if (upper == kUnboundedTau) {
      CHECK(p.delta == 0.0);
      continue;
    }
    CHECK(nu_tau(p, static_cast<double>(upper)) > 0.0);
    CHECK(nu_tau(p, static_cast<double>(upper) + 1.0) <= 0.0);
  }
}
