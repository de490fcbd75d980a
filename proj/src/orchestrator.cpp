#include "mel/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "mel/convergence_bounds.hpp"
#include "mel/errors.hpp"

namespace mel::orch {

namespace {

constexpr double kDegenerateDisplacement = 1e-12;
constexpr double kTimeSlack = 1e-9;

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> diff(const std::vector<double>& a,
                         const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

sched::FleetCosts make_costs(const std::vector<cost::LearnerProfile>& fleet,
                             cost::OffloadMode mode, std::int64_t d, double T) {
  sched::FleetCosts costs;
  costs.coeffs.reserve(fleet.size());
  for (const auto& p : fleet) costs.coeffs.push_back(cost_coefficients(p, mode));
  costs.total_samples = d;
  costs.budget_s = T;
  return costs;
}

// Simulated duration of one global cycle: tau local updates plus one model
// (and, in OL, data) exchange for the busiest participating learner.
double cycle_time(const sched::FleetCosts& costs,
                  const std::vector<std::int64_t>& batches, std::int64_t tau) {
  double worst = 0.0;
  for (std::size_t k = 0; k < batches.size(); ++k) {
    if (batches[k] <= 0) continue;
    worst = std::max(worst,
                     cost::total_time(costs.coeffs[k],
                                      static_cast<double>(batches[k]),
                                      static_cast<double>(tau),
                                      static_cast<double>(tau)));
  }
  return worst;
}

// Largest tau' <= tau whose cycle fits the remaining budget with the given
// batches (Algorithm step: reduce tau, keep the allocation).
std::int64_t reduce_tau(const sched::FleetCosts& costs,
                        const std::vector<std::int64_t>& batches,
                        std::int64_t tau, double remaining) {
  std::int64_t best = tau;
  for (std::size_t k = 0; k < batches.size(); ++k) {
    if (batches[k] <= 0) continue;
    const auto& c = costs.coeffs[k];
    const double dk = static_cast<double>(batches[k]);
    const double exchange = c.c1 * dk + c.c0;
    const double compute = c.c2 * dk;
    const double room = (remaining + kTimeSlack - exchange) / compute;
    const std::int64_t fit =
        room > 0.0 ? static_cast<std::int64_t>(std::floor(room)) : 0;
    best = std::min(best, fit);
  }
  return std::max<std::int64_t>(best, 0);
}

struct Plan {
  std::int64_t tau = 1;
  double l_planned = 1.0;
  std::vector<std::int64_t> batches;
  double bound = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace

BetaEstimate estimate_beta(const std::vector<std::vector<double>>& w_k,
                           const std::vector<double>& w,
                           const std::vector<std::vector<double>>& grad_at_wk,
                           const std::vector<std::vector<double>>& grad_at_w,
                           const std::vector<std::int64_t>& d_k,
                           double warm_beta) {
  if (w_k.size() != grad_at_wk.size() || w_k.size() != grad_at_w.size() ||
      w_k.size() != d_k.size()) {
    throw std::invalid_argument("estimate_beta: input size mismatch");
  }
  double weighted = 0.0;
  double weight = 0.0;
  for (std::size_t k = 0; k < w_k.size(); ++k) {
    if (d_k[k] <= 0) continue;
    const double displacement = norm2(diff(w_k[k], w));
    if (displacement < kDegenerateDisplacement) continue;
    const double beta_k = norm2(diff(grad_at_wk[k], grad_at_w[k])) / displacement;
    weighted += static_cast<double>(d_k[k]) * beta_k;
    weight += static_cast<double>(d_k[k]);
  }
  BetaEstimate est;
  if (weight == 0.0) {
    est.value = warm_beta;
    est.degenerate = true;
    return est;
  }
  est.value = weighted / weight;
  return est;
}

double estimate_delta_gradient(const std::vector<std::vector<double>>& local_grads,
                               const std::vector<std::int64_t>& d_k) {
  if (local_grads.size() != d_k.size()) {
    throw std::invalid_argument("estimate_delta: input size mismatch");
  }
  double weight = 0.0;
  std::vector<double> mean;
  for (std::size_t k = 0; k < local_grads.size(); ++k) {
    if (d_k[k] <= 0) continue;
    if (mean.empty()) mean.assign(local_grads[k].size(), 0.0);
    for (std::size_t j = 0; j < mean.size(); ++j) {
      mean[j] += static_cast<double>(d_k[k]) * local_grads[k][j];
    }
    weight += static_cast<double>(d_k[k]);
  }
  if (weight == 0.0) {
    throw std::invalid_argument("estimate_delta: no samples allocated");
  }
  for (double& v : mean) v /= weight;

  double delta = 0.0;
  for (std::size_t k = 0; k < local_grads.size(); ++k) {
    if (d_k[k] <= 0) continue;
    delta += static_cast<double>(d_k[k]) * norm2(diff(local_grads[k], mean));
  }
  return delta / weight;
}

double estimate_delta_loss(const std::vector<double>& local_losses,
                           const std::vector<std::int64_t>& d_k) {
  if (local_losses.size() != d_k.size()) {
    throw std::invalid_argument("estimate_delta: input size mismatch");
  }
  double weight = 0.0;
  double mean = 0.0;
  for (std::size_t k = 0; k < local_losses.size(); ++k) {
    if (d_k[k] <= 0) continue;
    mean += static_cast<double>(d_k[k]) * local_losses[k];
    weight += static_cast<double>(d_k[k]);
  }
  if (weight == 0.0) {
    throw std::invalid_argument("estimate_delta: no samples allocated");
  }
  mean /= weight;
  double delta = 0.0;
  for (std::size_t k = 0; k < local_losses.size(); ++k) {
    if (d_k[k] <= 0) continue;
    delta += static_cast<double>(d_k[k]) * std::abs(local_losses[k] - mean);
  }
  return delta / weight;
}

std::vector<double> aggregate(const std::vector<std::vector<double>>& w_k,
                              const std::vector<std::int64_t>& d_k) {
  if (w_k.size() != d_k.size()) {
    throw std::invalid_argument("aggregate: input size mismatch");
  }
  double weight = 0.0;
  std::vector<double> out;
  for (std::size_t k = 0; k < w_k.size(); ++k) {
    if (d_k[k] <= 0) continue;
    if (out.empty()) out.assign(w_k[k].size(), 0.0);
    if (w_k[k].size() != out.size()) {
      throw std::invalid_argument("aggregate: inconsistent model dimensions");
    }
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] += static_cast<double>(d_k[k]) * w_k[k][j];
    }
    weight += static_cast<double>(d_k[k]);
  }
  if (weight == 0.0) {
    throw std::invalid_argument("aggregate: zero total weight");
  }
  for (double& v : out) v /= weight;
  return out;
}

std::int64_t auto_tau_max(const std::vector<cost::LearnerProfile>& fleet,
                          cost::OffloadMode mode, std::int64_t total_samples,
                          double budget_s, std::int64_t hard_cap) {
  if (fleet.empty()) throw std::invalid_argument("auto_tau_max: empty fleet");
  if (!(budget_s > 0.0)) throw std::invalid_argument("auto_tau_max: budget must be > 0");
  const double dk = static_cast<double>(total_samples) /
                    static_cast<double>(fleet.size());
  double max_compute = 0.0;
  double max_exchange = 0.0;
  for (const auto& p : fleet) {
    max_compute = std::max(max_compute, cost::time_compute(p, dk));
    max_exchange = std::max(max_exchange,
                            cost::time_send(p, dk, mode) + cost::time_receive(p, dk));
  }
  const double room = (budget_s / 3.0 - max_exchange) / max_compute;
  std::int64_t tau = room > 0.0 ? static_cast<std::int64_t>(std::floor(room)) : 0;
  tau = std::max<std::int64_t>(tau, 1);
  return std::min(tau, hard_cap);
}

TrainingReport run_training(std::vector<cost::LearnerProfile> fleet,
                            learner::LearnerBackend& backend,
                            const TrainOptions& options) {
  if (fleet.empty()) throw std::invalid_argument("run_training: empty fleet");
  if (!(options.budget_s > 0.0)) {
    throw std::invalid_argument("run_training: budget must be > 0");
  }
  const std::size_t k_count = fleet.size();
  if (backend.learner_count() != k_count) {
    throw std::invalid_argument("run_training: fleet/backend size mismatch");
  }
  if (options.total_samples < static_cast<std::int64_t>(k_count)) {
    throw std::invalid_argument("run_training: need at least one sample per learner");
  }

  std::mt19937_64 rng(options.seed * 0x9e3779b97f4a7c15ULL + 1);
  std::normal_distribution<double> normal;

  TrainingReport report;
  report.initial_budget_s = options.budget_s;

  std::vector<double> w(backend.dim());
  for (auto& v : w) v = 0.1 * normal(rng);  // w[0], the random starting model

  const std::vector<double> base_distance = [&] {
    std::vector<double> d;
    d.reserve(k_count);
    for (const auto& p : fleet) d.push_back(p.channel.distance_m);
    return d;
  }();

  // tau_max follows the 3-aggregation rule on the initial budget unless the
  // caller pinned it.
  const std::int64_t tau_max =
      options.tau_max > 0
          ? options.tau_max
          : auto_tau_max(fleet, options.mode, options.total_samples,
                         options.budget_s, options.tau_hard_cap);

  // Bootstrap plan: one local update on the equal split, before any
  // beta/delta estimates exist.
  Plan plan;
  plan.tau = 1;
  plan.l_planned = 1.0;
  plan.batches = sched::equal_split(options.total_samples, k_count);

  TrainingState state;
  state.w = std::move(w);
  state.remaining = options.budget_s;
  report.termination = "budget_exhausted";

  while (true) {
    sched::FleetCosts costs =
        make_costs(fleet, options.mode, options.total_samples,
                   std::max(state.remaining, kTimeSlack));

    double round_time = cycle_time(costs, plan.batches, plan.tau);
    if (round_time > state.remaining) {
      const std::int64_t reduced =
          reduce_tau(costs, plan.batches, plan.tau, state.remaining);
      if (reduced < 1) {
        if (state.round == 0) {
          report.termination = "infeasible_first_round";
        }
        break;
      }
      plan.tau = reduced;
      round_time = cycle_time(costs, plan.batches, plan.tau);
      if (round_time > state.remaining + kTimeSlack) break;
    }

    // Dispatch and local training.
    ++state.round;
    std::vector<std::vector<double>> w_k(k_count), grad_start(k_count),
        grad_end(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      if (plan.batches[k] <= 0) continue;
      auto result = backend.local_train(k, state.w, plan.batches[k],
                                        plan.tau, options.eta);
      w_k[k] = std::move(result.w);
      grad_start[k] = std::move(result.grad_start);
      grad_end[k] = std::move(result.grad_end);
    }
    // Degenerate-learner placeholders keep the vectors aligned.
    for (std::size_t k = 0; k < k_count; ++k) {
      if (plan.batches[k] > 0) continue;
      w_k[k] = state.w;
      grad_start[k].assign(state.w.size(), 0.0);
      grad_end[k].assign(state.w.size(), 0.0);
    }

    const BetaEstimate beta_est = estimate_beta(w_k, state.w, grad_end,
                                                grad_start, plan.batches,
                                                state.beta);
    state.w = aggregate(w_k, plan.batches);

    // Refresh estimates at the new aggregate.
    std::vector<std::vector<double>> grads_at_w(k_count);
    std::vector<double> losses_at_w(k_count, 0.0);
    for (std::size_t k = 0; k < k_count; ++k) {
      if (plan.batches[k] <= 0) continue;
      grads_at_w[k] = backend.local_gradient(k, state.w, plan.batches[k]);
      losses_at_w[k] = backend.local_loss(k, state.w, plan.batches[k]);
    }
    state.beta = options.beta_override ? *options.beta_override : beta_est.value;
    bool beta_clamped = false;
    if (state.beta * options.eta > 1.0) {
      // The planner requires eta*beta <= 1; pin the estimate at the boundary.
      state.beta = 1.0 / options.eta;
      beta_clamped = true;
    }
    state.beta = std::max(state.beta, 1e-9);
    if (options.delta_override) {
      state.delta = *options.delta_override;
    } else if (options.delta_estimator == DeltaEstimator::kGradient) {
      state.delta = estimate_delta_gradient(grads_at_w, plan.batches);
    } else {
      state.delta = estimate_delta_loss(losses_at_w, plan.batches);
    }

    double train_loss = 0.0;
    double loss_weight = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      if (plan.batches[k] <= 0) continue;
      train_loss += static_cast<double>(plan.batches[k]) * losses_at_w[k];
      loss_weight += static_cast<double>(plan.batches[k]);
    }
    train_loss /= loss_weight;

    state.remaining -= round_time;
    state.elapsed += round_time;
    report.total_time_s += round_time;

    RoundLog log;
    log.g = state.round;
    log.tau = plan.tau;
    log.l_planned = plan.l_planned;
    log.batches = plan.batches;
    log.max_time_s = round_time;
    log.beta = state.beta;
    log.delta = state.delta;
    log.global_loss = train_loss;
    log.bound = plan.bound;
    log.beta_degenerate = beta_est.degenerate;
    log.beta_clamped = beta_clamped;
    state.logs.push_back(log);
    report.rounds.push_back(std::move(log));
    report.final_train_loss = train_loss;

    if (state.remaining <= kTimeSlack) break;

    // Channel refresh between cycles (optional).
    if (options.resample_channels) {
      std::uniform_real_distribution<double> jitter(-options.distance_jitter,
                                                    options.distance_jitter);
      for (std::size_t k = 0; k < k_count; ++k) {
        fleet[k].channel.distance_m = base_distance[k] * (1.0 + jitter(rng));
      }
    }

    // Re-optimize (tau, L, d_k) for the remaining budget.
    try {
      const bounds::ConvergenceParams params(options.eta, state.beta,
                                             state.delta, options.b0);
      costs = make_costs(fleet, options.mode, options.total_samples,
                         state.remaining);
      sched::Schedule schedule;
      if (options.policy == Policy::HA) {
        const std::int64_t tau_star =
            sched::find_tau_star(costs, params, tau_max);
        schedule = sched::batch_allocation(costs, tau_star,
                                           sched::l_of_tau(costs, tau_star));
      } else {
        schedule = sched::hu_schedule(costs, params, tau_max);
      }
      plan.tau = schedule.tau;
      plan.l_planned = schedule.total_updates;
      plan.batches = schedule.batches;
      plan.bound = bounds::p_tau(params, static_cast<double>(schedule.tau)) /
                   schedule.total_updates;
    } catch (const InfeasibleError&) {
      report.termination = "planner_infeasible";
      break;
    }
  }

  report.final_w = state.w;
  report.final_eval_loss = backend.eval_loss(state.w);
  report.final_eval_accuracy = backend.eval_accuracy(state.w);
  if (report.rounds.empty()) {
    report.final_train_loss = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

}  // namespace mel::orch
