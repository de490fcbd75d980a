#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mel/cost_model.hpp"
#include "mel/learner_sim.hpp"
#include "mel/orchestrator.hpp"

namespace mel::config {

struct SchemaKey {
  enum class Type { kDouble, kInt, kBool, kString, kDoubleList, kStringList };
  std::string name;
  Type type;
  std::string default_value;  // textual; empty string means "unset"
  std::string doc;
};

// Every knob consumed anywhere in the system. The loader accepts exactly
// these keys; anything else is rejected by name.
const std::vector<SchemaKey>& schema();

struct ExperimentConfig {
  cost::OffloadMode mode = cost::OffloadMode::OL;

  // channel
  double bandwidth_hz = 5e6;
  double tx_power_dbm = 23.0;
  double noise_psd_dbm_hz = -174.0;
  std::vector<double> distance_m = {500.0};  // scalar or per-learner
  std::vector<double> gain_override;         // empty or per-learner
  bool resample_per_cycle = false;

  // fleet
  std::size_t learners = 20;
  std::vector<double> cpu_hz = {2.4e9, 1.2e9};  // cycled across learners
  double distance_jitter = 0.2;

  // model accounting
  cost::ModelSpec model;

  // convergence bounds
  double eta = 0.01;
  double b0 = 0.0075;
  std::optional<double> beta_override;
  std::optional<double> delta_override;

  // optimizer
  std::int64_t tau_max = 0;  // 0 = auto (the 3-aggregation rule)
  std::int64_t tau_hard_cap = 10000;
  orch::Policy policy = orch::Policy::HA;

  // synthetic task
  learner::TaskKind task_kind = learner::TaskKind::kLogistic;
  std::size_t task_dim = 8;
  double heterogeneity = 0.3;
  std::uint64_t seed = 1;
  std::int64_t total_samples = 54000;
  std::size_t eval_samples = 4000;
  double task_noise = 0.1;
  bool sgd_shuffle = false;

  orch::DeltaEstimator delta_estimator = orch::DeltaEstimator::kGradient;

  // experiment driver
  double train_budget_s = 300.0;
  std::vector<double> sweep_budgets = {300.0, 400.0, 500.0, 600.0};
  std::int64_t sweep_seeds = 20;  // cells use seeds 1..sweep_seeds
  std::vector<orch::Policy> sweep_policies = {orch::Policy::HA, orch::Policy::HU};

  // Learner profiles with per-learner distance jitter drawn from `seed`.
  std::vector<cost::LearnerProfile> build_fleet(std::uint64_t fleet_seed) const;
  learner::TaskSpec task_spec(std::uint64_t task_seed) const;
  orch::TrainOptions train_options(orch::Policy run_policy, double budget_s,
                                   std::uint64_t run_seed) const;
};

// Parses either the flat `key = value` text format or a JSON document
// (detected by a leading '{'). Unknown keys, malformed numbers, and
// mis-sized per-learner lists raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
ExperimentConfig default_config();

std::string policy_name(orch::Policy p);
orch::Policy parse_policy(const std::string& name);

}  // namespace mel::config
