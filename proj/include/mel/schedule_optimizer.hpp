#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mel/convergence_bounds.hpp"
#include "mel/cost_model.hpp"

namespace mel::sched {

// Per-fleet inputs of the joint (tau, L, d_k) problem.
struct FleetCosts {
  std::vector<cost::CostCoefficients> coeffs;
  std::int64_t total_samples = 0;  // d
  double budget_s = 0.0;           // T

  std::size_t size() const { return coeffs.size(); }
  void validate() const;
};

// One feasible joint decision. total_updates stays real-valued through the
// optimization (integrality of L is relaxed); batches are post-flooring.
struct Schedule {
  std::int64_t tau = 1;
  double total_updates = 0.0;        // L
  double global_cycles = 0.0;        // L / tau
  std::int64_t completed_cycles = 0; // floor(L / tau)
  std::vector<std::int64_t> batches; // d_k
  std::int64_t residual = 0;         // d - sum(batches), in [0, K)
  // Learners whose unclamped allocation was negative: their fixed exchange
  // overhead alone exceeds the budget, so they sit this schedule out.
  std::vector<std::size_t> excluded;
};

// L making learner k consume exactly T: T*tau / (c2*tau*d_k + c1*d_k + c0).
double l_given_dk_tau(const cost::CostCoefficients& c, double d_k, double tau,
                      double T);

// L(tau) under the equal-finish allocation with sum_k d_k = d:
//   L = T*tau * sum_k 1/(c2_k*(tau + a_k)) / (d + sum_k b_k/(tau + a_k)).
double l_of_tau(const FleetCosts& fleet, double tau);

// Inverts L back into integer batches: per-learner exact-finish value,
// clamped at zero, floored, with leftover samples pushed to the learners
// with the smallest marginal time per extra sample when the budget allows.
// Throws InfeasibleError (with the shortfall) when the unplaced residual
// reaches K, i.e. the given L cannot host d samples.
Schedule batch_allocation(const FleetCosts& fleet, std::int64_t tau, double L);

// Loss-bound objective O(tau) = P(tau)/L(tau). Throws InfeasibleError where
// nu(tau) <= 0.
double objective(const FleetCosts& fleet, const bounds::ConvergenceParams& p,
                 double tau);

struct SearchResult {
  std::int64_t tau_star = 1;
  int probes = 0;  // distinct objective evaluations
};

// Integer minimizer of O over [1, min(tau_max, feasible upper bound)] via
// bisection on successive differences of the unimodal sequence; ties break
// toward smaller tau. Probe count stays within O(log tau_max).
SearchResult find_tau_star_stats(const FleetCosts& fleet,
                                 const bounds::ConvergenceParams& p,
                                 std::int64_t tau_max);
std::int64_t find_tau_star(const FleetCosts& fleet,
                           const bounds::ConvergenceParams& p,
                           std::int64_t tau_max);

// Numeric certificate for the convexity of O and the sign structure of its
// factors, evaluated over a tau grid.
struct ConvexityReport {
  bool second_diff_positive = true;   // central 2nd difference of O > 0
  double worst_second_diff = 0.0;
  double worst_second_diff_tau = 0.0;
  double f_c = 0.0;                   // (C ln C + 1 - C)/ln C
  bool tau_min_above_threshold = true;
  bool m_prime_negative = true;
  bool n_prime_negative = true;
  bool m_second_positive = true;
  bool n_second_positive = true;

  bool pass() const {
    return second_diff_positive && tau_min_above_threshold &&
           m_prime_negative && n_prime_negative && m_second_positive &&
           n_second_positive;
  }
  std::string summary() const;
};

ConvexityReport convexity_certificate(const FleetCosts& fleet,
                                      const bounds::ConvergenceParams& p,
                                      const std::vector<double>& tau_grid);

// Equal split with the remainder handed to the lowest indices.
std::vector<std::int64_t> equal_split(std::int64_t d, std::size_t k);

// Bottleneck L at the equal split: min_k T*tau/(c2*tau*d_k + c1*d_k + c0).
double hu_l_of_tau(const FleetCosts& fleet, double tau);

// Heterogeneity-unaware baseline: equal batches, bottleneck L, and tau from
// the same objective search applied to the bottleneck L.
Schedule hu_schedule(const FleetCosts& fleet, const bounds::ConvergenceParams& p,
                     std::int64_t tau_max);

}  // namespace mel::sched
