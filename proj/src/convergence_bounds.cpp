#include "mel/convergence_bounds.hpp"

#include <cmath>
#include <stdexcept>

#include "mel/errors.hpp"

namespace mel::bounds {

namespace {

// Exact-sum path is O(tau); beyond this the closed form takes over.
constexpr std::int64_t kExactSumLimit = std::int64_t{1} << 20;

bool is_small_integer(double tau) {
  return tau == std::floor(tau) && tau <= static_cast<double>(kExactSumLimit);
}

// sum_{j=0}^{tau-1} (C^j - 1). Every term is >= 0, so the sum (and h built
// from it) stays exactly nonnegative; the j = 0 term makes h(1) exactly 0.
double geometric_excess(double c, std::int64_t tau) {
  double sum = 0.0;
  double power = 1.0;
  for (std::int64_t j = 0; j < tau; ++j) {
    sum += power - 1.0;
    power *= c;
    if (std::isinf(sum)) break;
  }
  return sum;
}

}  // namespace

ConvergenceParams::ConvergenceParams(double eta_in, double beta_in,
                                     double delta_in, double b0_in)
    : eta(eta_in), beta(beta_in), delta(delta_in), b0(b0_in) {
  if (!(eta > 0.0)) throw std::invalid_argument("ConvergenceParams: eta must be > 0");
  if (!(beta > 0.0)) throw std::invalid_argument("ConvergenceParams: beta must be > 0");
  if (!(delta >= 0.0)) throw std::invalid_argument("ConvergenceParams: delta must be >= 0");
  if (!(b0 > 0.0)) throw std::invalid_argument("ConvergenceParams: b0 must be > 0");
  eta_beta = eta * beta;
  if (!(eta_beta <= 1.0)) {
    throw std::invalid_argument("ConvergenceParams: eta*beta must be <= 1");
  }
  a_const = eta * (1.0 - beta * eta / 2.0);
  b_const = (delta / beta) * b0;
  c_const = 1.0 + eta_beta;
}

double h_tau(const ConvergenceParams& p, double tau) {
  if (!(tau >= 1.0)) throw std::domain_error("h_tau: tau must be >= 1");
  if (p.delta == 0.0) return 0.0;
  if (is_small_integer(tau)) {
    return p.delta * p.eta *
           geometric_excess(p.c_const, static_cast<std::int64_t>(tau));
  }
  // (delta/beta)*(C^tau - 1) = delta*eta*expm1(tau*log1p(eta*beta))/(eta*beta)
  const double excess = std::expm1(tau * std::log1p(p.eta_beta));
  return p.delta * p.eta * (excess / p.eta_beta - tau);
}

double nu_tau(const ConvergenceParams& p, double tau) {
  if (!(tau >= 1.0)) throw std::domain_error("nu_tau: tau must be >= 1");
  if (p.delta == 0.0) return p.a_const;
  double bracket;  // C^tau - 1 - (C-1)*tau
  if (is_small_integer(tau)) {
    bracket = p.eta_beta *
              geometric_excess(p.c_const, static_cast<std::int64_t>(tau));
  } else {
    bracket = std::expm1(tau * std::log1p(p.eta_beta)) - p.eta_beta * tau;
  }
  return p.a_const - p.b_const * bracket / tau;
}

double p_tau(const ConvergenceParams& p, double tau) {
  const double nu = nu_tau(p, tau);
  if (!(nu > 0.0)) {
    throw InfeasibleError("p_tau: nu(tau) <= 0, learning-rate bound violated at tau=" +
                          std::to_string(tau));
  }
  return 1.0 / nu;
}

std::int64_t feasible_tau_upper(const ConvergenceParams& p) {
  if (!(nu_tau(p, 1.0) > 0.0)) {
    throw InfeasibleError("feasible_tau_upper: nu(1) <= 0, configuration infeasible");
  }
  if (p.delta == 0.0) return kUnboundedTau;

  // nu is nonincreasing in tau, so the boundary is found by doubling then
  // bisecting. C > 1 strictly, so nu eventually goes negative.
  std::int64_t lo = 1;  // nu(lo) > 0
  std::int64_t hi = 2;
  while (nu_tau(p, static_cast<double>(hi)) > 0.0) {
    lo = hi;
    if (hi > kUnboundedTau / 2) return kUnboundedTau;
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (nu_tau(p, static_cast<double>(mid)) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace mel::bounds
