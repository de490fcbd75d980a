// melsched: schedule optimizer and training-loop simulator for distributed
// learning over heterogeneous wireless edge fleets.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mel/config.hpp"
#include "mel/errors.hpp"
#include "mel/experiment.hpp"
#include "mel/orchestrator.hpp"
#include "mel/schedule_optimizer.hpp"
#include "mel/wireless_link.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

struct CommonArgs {
  std::string config_path;
  std::optional<std::int64_t> seed;
  std::string out;
  std::string policy;
};

mel::config::ExperimentConfig load(const CommonArgs& args) {
  auto cfg = args.config_path.empty()
                 ? mel::config::default_config()
                 : mel::config::load_config(args.config_path);
  if (args.seed) cfg.seed = static_cast<std::uint64_t>(*args.seed);
  if (!args.policy.empty()) cfg.policy = mel::config::parse_policy(args.policy);
  return cfg;
}

mel::sched::FleetCosts fleet_costs(const mel::config::ExperimentConfig& cfg,
                                   double budget) {
  mel::sched::FleetCosts costs;
  for (const auto& p : cfg.build_fleet(cfg.seed)) {
    costs.coeffs.push_back(mel::cost::cost_coefficients(p, cfg.mode));
  }
  costs.total_samples = cfg.total_samples;
  costs.budget_s = budget;
  return costs;
}

// beta/delta for the static subcommands come from the overrides; training
// estimates them instead.
mel::bounds::ConvergenceParams static_params(
    const mel::config::ExperimentConfig& cfg) {
  const double beta = cfg.beta_override.value_or(1.0);
  const double delta = cfg.delta_override.value_or(0.1);
  return mel::bounds::ConvergenceParams(cfg.eta, beta, delta, cfg.b0);
}

std::int64_t resolve_tau_max(const mel::config::ExperimentConfig& cfg,
                             double budget) {
  if (cfg.tau_max > 0) return cfg.tau_max;
  return mel::orch::auto_tau_max(cfg.build_fleet(cfg.seed), cfg.mode,
                                 cfg.total_samples, budget, cfg.tau_hard_cap);
}

void write_or_print(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + out + "'");
  f << text;
}

int cmd_rate(const CommonArgs& args) {
  const auto cfg = load(args);
  const auto fleet = cfg.build_fleet(cfg.seed);
  std::ostringstream os;
  os << "k,cpu_hz,distance_m,gain,rate_bps,c2,c1,c0,a,b\n";
  for (const auto& p : fleet) {
    const auto c = mel::cost::cost_coefficients(p, cfg.mode);
    os << p.id << ',' << mel::experiment::format_double(p.cpu_hz) << ','
       << mel::experiment::format_double(p.channel.distance_m) << ','
       << mel::experiment::format_double(mel::wireless::effective_gain(p.channel))
       << ','
       << mel::experiment::format_double(mel::wireless::link_rate(p.channel))
       << ',' << mel::experiment::format_double(c.c2) << ','
       << mel::experiment::format_double(c.c1) << ','
       << mel::experiment::format_double(c.c0) << ','
       << mel::experiment::format_double(c.a) << ','
       << mel::experiment::format_double(c.b) << '\n';
  }
  write_or_print(args.out, os.str());
  return kExitOk;
}

int cmd_schedule(const CommonArgs& args) {
  const auto cfg = load(args);
  const double budget = cfg.train_budget_s;
  const auto costs = fleet_costs(cfg, budget);
  const auto params = static_params(cfg);
  const std::int64_t tau_max = resolve_tau_max(cfg, budget);

  mel::sched::Schedule schedule;
  if (cfg.policy == mel::orch::Policy::HA) {
    const std::int64_t tau = mel::sched::find_tau_star(costs, params, tau_max);
    schedule =
        mel::sched::batch_allocation(costs, tau, mel::sched::l_of_tau(costs, tau));
  } else {
    schedule = mel::sched::hu_schedule(costs, params, tau_max);
  }

  std::ostringstream os;
  os << "policy " << mel::config::policy_name(cfg.policy) << ", T "
     << mel::experiment::format_double(budget) << " s, tau_max " << tau_max
     << "\n"
     << "tau " << schedule.tau << ", L "
     << mel::experiment::format_double(schedule.total_updates) << ", cycles "
     << mel::experiment::format_double(schedule.global_cycles) << " ("
     << schedule.completed_cycles << " complete), residual "
     << schedule.residual << "\n"
     << "objective "
     << mel::experiment::format_double(
            mel::bounds::p_tau(params, static_cast<double>(schedule.tau)) /
            schedule.total_updates)
     << "\n\nk,d_k,time_s\n";
  for (std::size_t k = 0; k < schedule.batches.size(); ++k) {
    const double t = mel::cost::total_time(
        costs.coeffs[k], static_cast<double>(schedule.batches[k]),
        static_cast<double>(schedule.tau), schedule.total_updates);
    os << k << ',' << schedule.batches[k] << ','
       << mel::experiment::format_double(t) << '\n';
  }
  if (!schedule.excluded.empty()) {
    os << "# excluded (exchange overhead exceeds budget):";
    for (const auto k : schedule.excluded) os << ' ' << k;
    os << '\n';
  }
  write_or_print(args.out, os.str());
  return kExitOk;
}

int cmd_train(const CommonArgs& args) {
  const auto cfg = load(args);
  mel::experiment::CellResult cell = mel::experiment::run_cell(
      cfg, cfg.policy, cfg.train_budget_s, cfg.seed);
  if (!args.out.empty()) {
    write_or_print(args.out, mel::experiment::round_log_csv(cell.logs));
  }
  std::cout << "policy=" << cell.policy
            << " T=" << mel::experiment::format_double(cell.budget_s)
            << " seed=" << cell.seed << " rounds=" << cell.rounds
            << " simulated_time="
            << mel::experiment::format_double(cell.total_time_s)
            << " final_loss="
            << mel::experiment::format_double(cell.final_loss);
  if (std::isfinite(cell.final_accuracy)) {
    std::cout << " accuracy="
              << mel::experiment::format_double(cell.final_accuracy);
  }
  std::cout << " termination=" << cell.termination << "\n";
  if (args.out.empty()) {
    std::cout << mel::experiment::round_log_csv(cell.logs);
  }
  return cell.rounds == 0 ? kExitInfeasible : kExitOk;
}

int cmd_sweep(const CommonArgs& args) {
  const auto cfg = load(args);
  const auto report = mel::experiment::run_sweep(cfg);
  const std::string dir = args.out.empty() ? "out" : args.out;
  mel::experiment::emit_report(report, dir);
  std::cout << "wrote " << report.cells.size() << " cells to " << dir << "\n";
  std::cout << mel::experiment::loss_table(report);
  return kExitOk;
}

int cmd_certify(const CommonArgs& args) {
  const auto cfg = load(args);
  const auto costs = fleet_costs(cfg, cfg.train_budget_s);
  const auto params = static_params(cfg);
  std::vector<double> grid;
  const std::int64_t upper =
      std::min<std::int64_t>(200, mel::bounds::feasible_tau_upper(params));
  for (std::int64_t tau = 1; tau <= upper; ++tau) {
    grid.push_back(static_cast<double>(tau));
  }
  if (grid.size() < 3) {
    throw mel::InfeasibleError("certify: feasible tau range too small for a grid");
  }
  const auto report = mel::sched::convexity_certificate(costs, params, grid);
  std::cout << report.summary();
  return report.pass() ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mobile edge learning schedule optimizer and simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonArgs args;
  app.add_option("--config", args.config_path, "configuration file (flat or JSON)");
  app.add_option("--seed", args.seed, "override task.seed");
  app.add_option("--out", args.out, "output file or directory");
  app.add_option("--policy", args.policy, "HA or HU (overrides opt.policy)");

  auto* rate = app.add_subcommand("rate", "print link rates and cost coefficients");
  auto* schedule = app.add_subcommand("schedule", "compute one joint (tau, L, d_k) schedule");
  auto* train = app.add_subcommand("train", "simulate one orchestrated training run");
  auto* sweep = app.add_subcommand("sweep", "run the policy x budget x seed sweep");
  auto* certify = app.add_subcommand("certify", "numeric convexity certificate for the objective");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rate->parsed()) return cmd_rate(args);
    if (schedule->parsed()) return cmd_schedule(args);
    if (train->parsed()) return cmd_train(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (certify->parsed()) return cmd_certify(args);
  } catch (const mel::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
