#include "mel/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "mel/errors.hpp"
#include "mel/learner_sim.hpp"

namespace mel::experiment {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

double parse_csv_double(const std::string& s) {
  return std::strtod(s.c_str(), nullptr);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CellResult run_cell(const config::ExperimentConfig& cfg, orch::Policy policy,
                    double budget_s, std::uint64_t seed) {
  CellResult cell;
  cell.policy = config::policy_name(policy);
  cell.budget_s = budget_s;
  cell.seed = seed;

  const auto fleet = cfg.build_fleet(seed);
  learner::SyntheticTask task(cfg.task_spec(seed));
  const auto options = cfg.train_options(policy, budget_s, seed);

  const orch::TrainingReport report =
      orch::run_training(fleet, task, options);
  cell.final_loss = report.final_eval_loss;
  cell.rounds = static_cast<std::int64_t>(report.rounds.size());
  cell.total_time_s = report.total_time_s;
  cell.final_accuracy = report.final_eval_accuracy;
  cell.termination = report.termination;
  cell.logs = report.rounds;
  return cell;
}

ExperimentReport run_sweep(const config::ExperimentConfig& cfg) {
  ExperimentReport report;
  for (const orch::Policy policy : cfg.sweep_policies) {
    for (const double budget : cfg.sweep_budgets) {
      for (std::int64_t seed = 1; seed <= cfg.sweep_seeds; ++seed) {
        try {
          report.cells.push_back(
              run_cell(cfg, policy, budget, static_cast<std::uint64_t>(seed)));
        } catch (const InfeasibleError&) {
          CellResult cell;
          cell.policy = config::policy_name(policy);
          cell.budget_s = budget;
          cell.seed = static_cast<std::uint64_t>(seed);
          cell.final_loss = std::numeric_limits<double>::quiet_NaN();
          report.cells.push_back(std::move(cell));
        }
      }
    }
  }
  return report;
}

std::string summary_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "policy,T,seed,final_loss,rounds,total_time\n";
  for (const auto& cell : report.cells) {
    os << cell.policy << ',' << format_double(cell.budget_s) << ','
       << cell.seed << ',' << format_double(cell.final_loss) << ','
       << cell.rounds << ',' << format_double(cell.total_time_s) << '\n';
  }
  return os.str();
}

ExperimentReport parse_summary_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) ||
      line != "policy,T,seed,final_loss,rounds,total_time") {
    throw ConfigError("summary csv: bad header");
  }
  ExperimentReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) throw ConfigError("summary csv: bad row: " + line);
    CellResult cell;
    cell.policy = fields[0];
    cell.budget_s = parse_csv_double(fields[1]);
    cell.seed = static_cast<std::uint64_t>(std::strtoull(fields[2].c_str(), nullptr, 10));
    cell.final_loss = parse_csv_double(fields[3]);
    cell.rounds = std::strtoll(fields[4].c_str(), nullptr, 10);
    cell.total_time_s = parse_csv_double(fields[5]);
    report.cells.push_back(std::move(cell));
  }
  return report;
}

std::string round_log_csv(const std::vector<orch::RoundLog>& logs) {
  std::ostringstream os;
  os << "g,tau,L,max_time_s,beta,delta,global_loss,bound\n";
  for (const auto& log : logs) {
    os << log.g << ',' << log.tau << ',' << format_double(log.l_planned) << ','
       << format_double(log.max_time_s) << ',' << format_double(log.beta)
       << ',' << format_double(log.delta) << ','
       << format_double(log.global_loss) << ',' << format_double(log.bound)
       << '\n';
  }
  return os.str();
}

std::string loss_table(const ExperimentReport& report) {
  std::map<double, std::map<std::string, std::vector<double>>> by_budget;
  for (const auto& cell : report.cells) {
    if (std::isnan(cell.final_loss)) continue;
    by_budget[cell.budget_s][cell.policy].push_back(cell.final_loss);
  }
  std::vector<std::string> policies;
  for (const auto& cell : report.cells) {
    if (std::find(policies.begin(), policies.end(), cell.policy) ==
        policies.end()) {
      policies.push_back(cell.policy);
    }
  }
  std::ostringstream os;
  os << "median final loss vs training budget\n";
  os << "T_seconds";
  for (const auto& p : policies) os << '\t' << p;
  os << '\n';
  for (const auto& [budget, losses] : by_budget) {
    os << format_double(budget);
    for (const auto& p : policies) {
      auto it = losses.find(p);
      os << '\t'
         << (it == losses.end() ? "nan" : format_double(median(it->second)));
    }
    os << '\n';
  }
  return os.str();
}

void emit_report(const ExperimentReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("emit_report: cannot create directory '" + dir +
                             "': " + ec.message());
  }
  const auto write_file = [&](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      throw std::runtime_error("emit_report: cannot write '" + path.string() +
                               "'");
    }
    out << text;
  };
  write_file(fs::path(dir) / "summary.csv", summary_csv(report));
  write_file(fs::path(dir) / "loss_vs_T.txt", loss_table(report));
  for (const auto& cell : report.cells) {
    std::ostringstream name;
    name << "rounds_" << cell.policy << "_T" << format_double(cell.budget_s)
         << "_seed" << cell.seed << ".csv";
    write_file(fs::path(dir) / name.str(), round_log_csv(cell.logs));
  }
}

}  // namespace mel::experiment
