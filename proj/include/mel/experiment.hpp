#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mel/config.hpp"
#include "mel/orchestrator.hpp"

namespace mel::experiment {

// One (policy, budget, seed) training run. final_loss is the loss on the
// policy-independent held-out split, so HA and HU rows are comparable.
struct CellResult {
  std::string policy;
  double budget_s = 0.0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  std::int64_t rounds = 0;
  double total_time_s = 0.0;
  // Carried for the CLI and tests, not serialized into summary.csv:
  double final_accuracy = 0.0;  // NaN on quadratic tasks
  std::string termination;
  std::vector<orch::RoundLog> logs;
};

struct ExperimentReport {
  std::vector<CellResult> cells;
};

CellResult run_cell(const config::ExperimentConfig& cfg, orch::Policy policy,
                    double budget_s, std::uint64_t seed);

// Every sweep.policies x sweep.budgets x seed in 1..sweep.seeds, in that
// nesting order. Infeasible cells record NaN loss and zero rounds instead of
// aborting the sweep.
ExperimentReport run_sweep(const config::ExperimentConfig& cfg);

// Header is exactly: policy,T,seed,final_loss,rounds,total_time
std::string summary_csv(const ExperimentReport& report);
ExperimentReport parse_summary_csv(const std::string& csv);

// Header is exactly: g,tau,L,max_time_s,beta,delta,global_loss,bound
std::string round_log_csv(const std::vector<orch::RoundLog>& logs);

// Plain-text median-loss-vs-budget table, one row per budget, one column per
// policy (the axes of the loss figures).
std::string loss_table(const ExperimentReport& report);

// Writes summary.csv, per-cell round logs, and loss_vs_T.txt under dir.
void emit_report(const ExperimentReport& report, const std::string& dir);

// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double v);

}  // namespace mel::experiment
