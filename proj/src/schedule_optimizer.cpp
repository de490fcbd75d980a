#include "mel/schedule_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "mel/errors.hpp"

namespace mel::sched {

namespace {

constexpr double kTimeSlack = 1e-9;  // seconds of tolerance on the budget

// Real-valued exact-finish allocation for learner k at (tau, L).
double real_batch(const cost::CostCoefficients& c, double tau, double L,
                  double T) {
  return (T * tau / L - c.c0) / (c.c2 * tau + c.c1);
}

double marginal_time(const cost::CostCoefficients& c, double tau) {
  return c.c2 + c.c1 / tau;
}

// Generic leftmost-argmin search on a unimodal integer sequence, bisecting on
// the sign of successive differences. Evaluations are cached so repeated
// probes of the same tau are free.
struct UnimodalSearch {
  std::function<double(std::int64_t)> fn;
  std::unordered_map<std::int64_t, double> cache;
  int probes = 0;

  double eval(std::int64_t tau) {
    auto it = cache.find(tau);
    if (it != cache.end()) return it->second;
    const double v = fn(tau);
    ++probes;
    cache.emplace(tau, v);
    return v;
  }

  std::int64_t minimize(std::int64_t lo, std::int64_t hi) {
    while (lo < hi) {
      const std::int64_t mid = lo + (hi - lo) / 2;
      if (eval(mid) <= eval(mid + 1)) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  }
};

std::int64_t clip_to_feasible(const bounds::ConvergenceParams& p,
                              std::int64_t tau_max) {
  const std::int64_t upper = bounds::feasible_tau_upper(p);
  return std::min(tau_max, upper);
}

}  // namespace

void FleetCosts::validate() const {
  if (coeffs.empty()) throw std::invalid_argument("FleetCosts: empty fleet");
  if (total_samples < static_cast<std::int64_t>(coeffs.size())) {
    throw std::invalid_argument("FleetCosts: need at least one sample per learner");
  }
  if (!(budget_s > 0.0)) throw std::invalid_argument("FleetCosts: budget must be > 0");
  for (const auto& c : coeffs) {
    if (!(c.c2 > 0.0) || !(c.c0 > 0.0) || !(c.c1 >= 0.0)) {
      throw std::invalid_argument("FleetCosts: coefficients out of range");
    }
  }
}

double l_given_dk_tau(const cost::CostCoefficients& c, double d_k, double tau,
                      double T) {
  if (!(tau >= 1.0)) throw std::domain_error("l_given_dk_tau: tau must be >= 1");
  if (!(d_k >= 0.0)) throw std::domain_error("l_given_dk_tau: d_k must be >= 0");
  return T * tau / (c.c2 * tau * d_k + c.c1 * d_k + c.c0);
}

double l_of_tau(const FleetCosts& fleet, double tau) {
  if (!(tau >= 1.0)) throw std::domain_error("l_of_tau: tau must be >= 1");
  double inv_cost_sum = 0.0;  // sum_k 1/(c2*(tau + a))
  double b_sum = 0.0;         // sum_k b/(tau + a)
  for (const auto& c : fleet.coeffs) {
    inv_cost_sum += 1.0 / (c.c2 * (tau + c.a));
    b_sum += c.b / (tau + c.a);
  }
  return fleet.budget_s * tau * inv_cost_sum /
         (static_cast<double>(fleet.total_samples) + b_sum);
}

Schedule batch_allocation(const FleetCosts& fleet, std::int64_t tau, double L) {
  fleet.validate();
  if (tau < 1) throw std::domain_error("batch_allocation: tau must be >= 1");
  if (!(L > 0.0)) throw std::domain_error("batch_allocation: L must be > 0");

  const std::size_t k_count = fleet.size();
  const double T = fleet.budget_s;
  const double tau_d = static_cast<double>(tau);

  Schedule s;
  s.tau = tau;
  s.total_updates = L;
  s.global_cycles = L / tau_d;
  s.completed_cycles = static_cast<std::int64_t>(std::floor(s.global_cycles));
  s.batches.assign(k_count, 0);

  std::vector<bool> participates(k_count, true);
  std::int64_t allocated = 0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const double real = real_batch(fleet.coeffs[k], tau_d, L, T);
    if (real < 0.0) {
      participates[k] = false;
      s.excluded.push_back(k);
      continue;
    }
    s.batches[k] = static_cast<std::int64_t>(std::floor(real));
    allocated += s.batches[k];
  }

  // Cheapest-first processing order for residual placement and, reversed,
  // for trimming an over-allocation.
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < k_count; ++k) {
    if (participates[k]) order.push_back(k);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const double mx = marginal_time(fleet.coeffs[x], tau_d);
    const double my = marginal_time(fleet.coeffs[y], tau_d);
    return mx != my ? mx < my : x < y;
  });

  if (allocated > fleet.total_samples) {
    // Possible when callers pass an L below the equal-finish value; shed
    // samples from the most expensive learners first.
    std::int64_t excess = allocated - fleet.total_samples;
    for (auto it = order.rbegin(); it != order.rend() && excess > 0; ++it) {
      const std::int64_t take = std::min(excess, s.batches[*it]);
      s.batches[*it] -= take;
      excess -= take;
    }
    allocated = fleet.total_samples;
  }

  std::int64_t residual = fleet.total_samples - allocated;
  if (residual > 0) {
    for (std::int64_t i = 0; i < residual;) {
      bool placed = false;
      for (std::size_t k : order) {
        const double t_next = cost::total_time(
            fleet.coeffs[k], static_cast<double>(s.batches[k] + 1), tau_d, L);
        if (t_next <= T + kTimeSlack) {
          ++s.batches[k];
          ++i;
          placed = true;
          break;
        }
      }
      if (!placed) break;  // remaining samples stay as residual
    }
  }

  std::int64_t placed_total = std::accumulate(s.batches.begin(), s.batches.end(),
                                              std::int64_t{0});
  s.residual = fleet.total_samples - placed_total;
  if (s.residual >= static_cast<std::int64_t>(k_count)) {
    throw InfeasibleError(
        "batch_allocation: cannot place all samples within the budget, shortfall=" +
            std::to_string(s.residual),
        static_cast<double>(s.residual));
  }
  return s;
}

double objective(const FleetCosts& fleet, const bounds::ConvergenceParams& p,
                 double tau) {
  return bounds::p_tau(p, tau) / l_of_tau(fleet, tau);
}

SearchResult find_tau_star_stats(const FleetCosts& fleet,
                                 const bounds::ConvergenceParams& p,
                                 std::int64_t tau_max) {
  fleet.validate();
  if (tau_max < 1) throw std::invalid_argument("find_tau_star: tau_max must be >= 1");
  const std::int64_t hi = clip_to_feasible(p, tau_max);

  UnimodalSearch search;
  search.fn = [&](std::int64_t tau) {
    return objective(fleet, p, static_cast<double>(tau));
  };
  SearchResult r;
  r.tau_star = search.minimize(1, hi);
  r.probes = search.probes;
  return r;
}

std::int64_t find_tau_star(const FleetCosts& fleet,
                           const bounds::ConvergenceParams& p,
                           std::int64_t tau_max) {
  return find_tau_star_stats(fleet, p, tau_max).tau_star;
}

namespace {

// Reduced (overflow-safe) forms of the objective factors 1/L = M + N and the
// certificate derivatives, in terms of a_k, b_k, d, K, T.
struct FactorSums {
  double s_tau;   // sum_k tau/(tau + b_k)
  double s_b2;    // sum_k b_k/(tau + b_k)^2
  double s_b3;    // sum_k b_k/(tau + b_k)^3
  double s_inv2;  // sum_k 1/(tau + b_k)^2
  double s_inv3;  // sum_k 1/(tau + b_k)^3
};

FactorSums factor_sums(const FleetCosts& fleet, double tau) {
  FactorSums f{0, 0, 0, 0, 0};
  for (const auto& c : fleet.coeffs) {
    const double den = tau + c.b;
    f.s_tau += tau / den;
    f.s_b2 += c.b / (den * den);
    f.s_b3 += c.b / (den * den * den);
    f.s_inv2 += 1.0 / (den * den);
    f.s_inv3 += 1.0 / (den * den * den);
  }
  return f;
}

}  // namespace

std::string ConvexityReport::summary() const {
  std::ostringstream os;
  os << "convexity certificate: " << (pass() ? "PASS" : "FAIL") << "\n"
     << "  O'' central difference > 0 : " << (second_diff_positive ? "yes" : "NO")
     << " (worst " << worst_second_diff << " at tau=" << worst_second_diff_tau
     << ")\n"
     << "  f(C) = " << f_c << ", grid min above f(C): "
     << (tau_min_above_threshold ? "yes" : "NO") << "\n"
     << "  M' < 0: " << (m_prime_negative ? "yes" : "NO")
     << ", N' < 0: " << (n_prime_negative ? "yes" : "NO")
     << ", M'' > 0: " << (m_second_positive ? "yes" : "NO")
     << ", N'' > 0: " << (n_second_positive ? "yes" : "NO") << "\n";
  return os.str();
}

ConvexityReport convexity_certificate(const FleetCosts& fleet,
                                      const bounds::ConvergenceParams& p,
                                      const std::vector<double>& tau_grid) {
  fleet.validate();
  if (tau_grid.size() < 3) {
    throw std::invalid_argument("convexity_certificate: need at least 3 grid points");
  }
  ConvexityReport rep;
  const double ln_c = std::log(p.c_const);
  rep.f_c = (p.c_const * ln_c + 1.0 - p.c_const) / ln_c;
  const double tau_min = *std::min_element(tau_grid.begin(), tau_grid.end());
  rep.tau_min_above_threshold = tau_min > rep.f_c;

  const double d = static_cast<double>(fleet.total_samples);
  const double kt = static_cast<double>(fleet.size()) * fleet.budget_s;

  std::vector<double> o_values(tau_grid.size());
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    o_values[i] = objective(fleet, p, tau_grid[i]);
  }

  rep.worst_second_diff = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < tau_grid.size(); ++i) {
    const double h_l = tau_grid[i] - tau_grid[i - 1];
    const double h_r = tau_grid[i + 1] - tau_grid[i];
    const double second =
        2.0 * ((o_values[i + 1] - o_values[i]) / h_r -
               (o_values[i] - o_values[i - 1]) / h_l) /
        (h_l + h_r);
    if (second < rep.worst_second_diff) {
      rep.worst_second_diff = second;
      rep.worst_second_diff_tau = tau_grid[i];
    }
    if (!(second > 0.0)) rep.second_diff_positive = false;
  }

  for (const double tau : tau_grid) {
    const FactorSums f = factor_sums(fleet, tau);
    const double m_prime = -(d / kt) * f.s_b2 / (f.s_tau * f.s_tau);
    const double n_prime =
        m_prime / d - (1.0 / kt) * 2.0 * f.s_b3 / (f.s_tau * f.s_tau);
    const double m_second =
        (d / kt) * (2.0 * f.s_b3 + f.s_b2) / (f.s_tau * f.s_tau);
    double n_second = 0.0;
    for (const auto& c : fleet.coeffs) {
      const double den = tau + c.b;
      const double bracket =
          f.s_tau + 2.0 * den * f.s_inv2 + 2.0 * f.s_inv3;
      n_second += c.a / (den * den * den * std::pow(f.s_tau, 4)) * bracket;
    }
    n_second /= kt;

    if (!(m_prime < 0.0)) rep.m_prime_negative = false;
    if (!(n_prime < 0.0)) rep.n_prime_negative = false;
    if (!(m_second > 0.0)) rep.m_second_positive = false;
    // a_k may be zero across the fleet (FL mode with batch-independent
    // models), which collapses N to zero; require nonnegativity then.
    const bool any_a = std::any_of(fleet.coeffs.begin(), fleet.coeffs.end(),
                                   [](const auto& c) { return c.a > 0.0; });
    if (any_a ? !(n_second > 0.0) : !(n_second >= 0.0)) {
      rep.n_second_positive = false;
    }
  }
  return rep;
}

std::vector<std::int64_t> equal_split(std::int64_t d, std::size_t k) {
  if (k == 0) throw std::invalid_argument("equal_split: k must be > 0");
  std::vector<std::int64_t> out(k, d / static_cast<std::int64_t>(k));
  const std::int64_t rem = d % static_cast<std::int64_t>(k);
  for (std::int64_t i = 0; i < rem; ++i) ++out[static_cast<std::size_t>(i)];
  return out;
}

double hu_l_of_tau(const FleetCosts& fleet, double tau) {
  if (!(tau >= 1.0)) throw std::domain_error("hu_l_of_tau: tau must be >= 1");
  const auto batches = equal_split(fleet.total_samples, fleet.size());
  double l = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    l = std::min(l, l_given_dk_tau(fleet.coeffs[k],
                                   static_cast<double>(batches[k]), tau,
                                   fleet.budget_s));
  }
  return l;
}

Schedule hu_schedule(const FleetCosts& fleet, const bounds::ConvergenceParams& p,
                     std::int64_t tau_max) {
  fleet.validate();
  if (tau_max < 1) throw std::invalid_argument("hu_schedule: tau_max must be >= 1");
  const std::int64_t hi = clip_to_feasible(p, tau_max);

  UnimodalSearch search;
  search.fn = [&](std::int64_t tau) {
    return bounds::p_tau(p, static_cast<double>(tau)) /
           hu_l_of_tau(fleet, static_cast<double>(tau));
  };
  const std::int64_t tau_star = search.minimize(1, hi);

  Schedule s;
  s.tau = tau_star;
  s.batches = equal_split(fleet.total_samples, fleet.size());
  s.total_updates = hu_l_of_tau(fleet, static_cast<double>(tau_star));
  s.global_cycles = s.total_updates / static_cast<double>(tau_star);
  s.completed_cycles = static_cast<std::int64_t>(std::floor(s.global_cycles));
  s.residual = 0;
  return s;
}

}  // namespace mel::sched
