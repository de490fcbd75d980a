#pragma once

#include <cstdint>
#include <limits>

namespace mel::bounds {

// Returned by feasible_tau_upper when the divergence penalty is absent
// (delta == 0) and every tau keeps the bound positive.
inline constexpr std::int64_t kUnboundedTau =
    std::numeric_limits<std::int64_t>::max();

// Learning-rate / smoothness / divergence parameters together with the
// derived constants of the loss-gap bound:
//   A = eta*(1 - beta*eta/2),  B = (delta/beta)*b0,  C = eta*beta + 1.
// Construction enforces eta*beta <= 1, which pins C into (1, 2].
struct ConvergenceParams {
  ConvergenceParams(double eta, double beta, double delta, double b0);

  double eta;
  double beta;
  double delta;
  double b0;

  double eta_beta;  // eta*beta, the primary rounding of C - 1
  double a_const;   // A
  double b_const;   // B
  double c_const;   // C
};

// Divergence bound between the distributed aggregate and the auxiliary
// centralized trajectory after tau local updates:
//   h(tau) = (delta/beta)*(C^tau - 1) - eta*delta*tau.
// Evaluated through the geometric-sum form delta*eta*sum_{j<tau}(C^j - 1) at
// integer tau, which keeps h(1) == 0 and h >= 0 exact in floating point.
// Real-valued tau (used by the convexity certificates) takes the closed form.
double h_tau(const ConvergenceParams& p, double tau);

// nu(tau) = A - B*(C^tau - 1 - (C-1)*tau)/tau, identically A - b0*h(tau)/tau.
double nu_tau(const ConvergenceParams& p, double tau);

// Loss-gap factor P(tau) = 1/nu(tau). Throws InfeasibleError when
// nu(tau) <= 0 (the learning-rate bound fails at this tau).
double p_tau(const ConvergenceParams& p, double tau);

// Largest integer tau with nu(tau) > 0, found by doubling + bisection.
// Returns kUnboundedTau when nu never crosses zero (delta == 0). Throws
// InfeasibleError when even nu(1) <= 0 (cannot happen for valid params,
// where nu(1) = A > 0, but guarded for safety).
std::int64_t feasible_tau_upper(const ConvergenceParams& p);

}  // namespace mel::bounds
