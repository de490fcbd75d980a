#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mel/cost_model.hpp"
#include "mel/learner_sim.hpp"
#include "mel/schedule_optimizer.hpp"

namespace mel::orch {

enum class Policy { HA, HU };
enum class DeltaEstimator { kGradient, kLoss };

struct RoundLog {
  std::int64_t g = 0;
  std::int64_t tau = 0;
  double l_planned = 0.0;
  std::vector<std::int64_t> batches;
  double max_time_s = 0.0;  // simulated wall time of this cycle
  double beta = 0.0;
  double delta = 0.0;
  double global_loss = 0.0;  // weighted training loss at the new aggregate
  double bound = 0.0;        // objective value of the executed plan
  bool beta_degenerate = false;
  bool beta_clamped = false;
};

struct TrainingReport {
  std::vector<RoundLog> rounds;
  std::vector<double> final_w;
  double initial_budget_s = 0.0;
  double total_time_s = 0.0;  // sum of simulated round times, <= budget
  double final_train_loss = 0.0;
  double final_eval_loss = 0.0;
  double final_eval_accuracy = 0.0;
  std::string termination;
};

// Mutable loop state of one orchestrated run. elapsed + remaining always
// reconstructs the initial budget (up to accumulation rounding).
struct TrainingState {
  std::vector<double> w;
  double elapsed = 0.0;
  double remaining = 0.0;
  std::int64_t round = 0;
  double beta = 1.0;   // warm-started estimates
  double delta = 0.0;
  std::vector<RoundLog> logs;
};

struct TrainOptions {
  Policy policy = Policy::HA;
  cost::OffloadMode mode = cost::OffloadMode::OL;
  std::int64_t total_samples = 54000;  // d, the dataset to spread per cycle
  double budget_s = 300.0;
  double eta = 0.01;
  double b0 = 0.0075;
  std::int64_t tau_max = 0;  // 0 = derive from the 3-aggregation rule
  std::int64_t tau_hard_cap = 10000;
  DeltaEstimator delta_estimator = DeltaEstimator::kGradient;
  std::optional<double> beta_override;
  std::optional<double> delta_override;
  std::uint64_t seed = 1;
  bool resample_channels = false;  // re-jitter distances every cycle
  double distance_jitter = 0.2;
};

struct BetaEstimate {
  double value = 0.0;
  bool degenerate = false;  // every learner's displacement was ~zero
  bool clamped = false;     // estimate exceeded 1/eta and was pinned there
};

// Weighted secant smoothness estimate: beta_k = |dF_k(w_k) - dF_k(w)| /
// |w_k - w|, averaged with weights d_k over learners whose displacement is
// at least 1e-12. Falls back to warm_beta when all are degenerate.
BetaEstimate estimate_beta(const std::vector<std::vector<double>>& w_k,
                           const std::vector<double>& w,
                           const std::vector<std::vector<double>>& grad_at_wk,
                           const std::vector<std::vector<double>>& grad_at_w,
                           const std::vector<std::int64_t>& d_k,
                           double warm_beta);

// Gradient-divergence estimator: delta_k = |dF_k(w) - dF(w)| with
// dF(w) the d_k-weighted mean of the local gradients.
double estimate_delta_gradient(const std::vector<std::vector<double>>& local_grads,
                               const std::vector<std::int64_t>& d_k);
// Loss-divergence variant: delta_k = |F_k(w) - F(w)|.
double estimate_delta_loss(const std::vector<double>& local_losses,
                           const std::vector<std::int64_t>& d_k);

// d_k-weighted model average; weights renormalize over the actual batches.
std::vector<double> aggregate(const std::vector<std::vector<double>>& w_k,
                              const std::vector<std::int64_t>& d_k);

// Largest tau such that three global cycles at the equal split d/K fit the
// budget; at least 1, at most hard_cap.
std::int64_t auto_tau_max(const std::vector<cost::LearnerProfile>& fleet,
                          cost::OffloadMode mode, std::int64_t total_samples,
                          double budget_s, std::int64_t hard_cap);

// The full orchestration loop: dispatch, local updates, aggregate, refresh
// beta/delta estimates, decrement the budget, re-optimize (tau, L, d_k), and
// shrink tau when the next cycle no longer fits.
TrainingReport run_training(std::vector<cost::LearnerProfile> fleet,
                            learner::LearnerBackend& backend,
                            const TrainOptions& options);

}  // namespace mel::orch
