#include <doctest.h>

#include <set>
#include <string>

#include "mel/config.hpp"
#include "mel/errors.hpp"

using namespace mel::config;
using mel::ConfigError;

TEST_CASE("empty config resolves to the reference defaults") {
  const ExperimentConfig cfg = parse_config("");
  CHECK(cfg.mode == mel::cost::OffloadMode::OL);
  CHECK(cfg.bandwidth_hz == 5e6);
  CHECK(cfg.tx_power_dbm == 23.0);
  CHECK(cfg.noise_psd_dbm_hz == -174.0);
  REQUIRE(cfg.distance_m.size() == 1);
  CHECK(cfg.distance_m[0] == 500.0);
  CHECK(cfg.learners == 20);
  CHECK(cfg.cpu_hz == std::vector<double>{2.4e9, 1.2e9});
  CHECK(cfg.model.features == 784.0);
  CHECK(cfg.total_samples == 54000);
  CHECK(cfg.eta == 0.01);
  CHECK(cfg.b0 == 0.0075);
  CHECK_FALSE(cfg.beta_override.has_value());
  CHECK(cfg.tau_max == 0);  // auto
  CHECK(cfg.tau_hard_cap == 10000);
  CHECK(cfg.policy == mel::orch::Policy::HA);
  CHECK(cfg.task_kind == mel::learner::TaskKind::kLogistic);
  CHECK(cfg.sweep_budgets == std::vector<double>{300.0, 400.0, 500.0, 600.0});
  CHECK(cfg.sweep_seeds == 20);
  REQUIRE(cfg.sweep_policies.size() == 2);
}

TEST_CASE("fleet of 20 alternates the reference CPU rates") {
  const ExperimentConfig cfg = parse_config("fleet.K = 20");
  const auto fleet = cfg.build_fleet(1);
  REQUIRE(fleet.size() == 20);
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    CHECK(fleet[k].cpu_hz == (k % 2 == 0 ? 2.4e9 : 1.2e9));
    CHECK(fleet[k].id == k);
    // Jittered around 500 m by at most 20%.
    CHECK(fleet[k].channel.distance_m >= 400.0);
    CHECK(fleet[k].channel.distance_m <= 600.0);
  }
  // Same seed, same fleet; zero jitter pins the distance.
  const auto again = cfg.build_fleet(1);
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    CHECK(fleet[k].channel.distance_m == again[k].channel.distance_m);
  }
  const ExperimentConfig fixed =
      parse_config("fleet.distance_jitter = 0\nfleet.K = 3");
  for (const auto& p : fixed.build_fleet(9)) {
    CHECK(p.channel.distance_m == 500.0);
  }
}

TEST_CASE("malformed numerics name the key and line") {
  try {
    parse_config("bounds.eta = 0.01\nbounds.b0 = oops\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bounds.b0") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    parse_config("bounds.eta = 0.01\nchannel.bandwith_hz = 5e6\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("channel.bandwith_hz") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("{\"nope\": 1}"), ConfigError);
}

TEST_CASE("json documents resolve like flat files") {
  const std::string json = R"({
    "fleet": {"K": 4, "distance_jitter": 0},
    "channel": {"distance_m": [100, 200, 300, 400]},
    "bounds": {"eta": 0.02, "beta_override": 1.5},
    "opt": {"tau_max": 77, "policy": "HU"},
    "sweep": {"policies": ["HU"], "budgets": [10, 20], "seeds": 2}
  })";
  const ExperimentConfig cfg = parse_config(json);
  CHECK(cfg.learners == 4);
  CHECK(cfg.distance_m == std::vector<double>{100.0, 200.0, 300.0, 400.0});
  CHECK(cfg.eta == 0.02);
  CHECK(cfg.beta_override == 1.5);
  CHECK(cfg.tau_max == 77);
  CHECK(cfg.policy == mel::orch::Policy::HU);
  CHECK(cfg.sweep_budgets == std::vector<double>{10.0, 20.0});
  CHECK(cfg.sweep_seeds == 2);
  const auto fleet = cfg.build_fleet(3);
  CHECK(fleet[2].channel.distance_m == 300.0);

  CHECK_THROWS_AS(parse_config("{\"fleet\": {\"K\": }"), ConfigError);
}

TEST_CASE("per-learner lists must match the fleet size") {
  CHECK_THROWS_AS(parse_config("fleet.K = 3\nchannel.distance_m = 100, 200"),
                  ConfigError);
  CHECK_NOTHROW(parse_config("fleet.K = 2\nchannel.distance_m = 100, 200"));
  CHECK_THROWS_AS(
      parse_config("fleet.K = 3\nchannel.gain_override = 1e-12, 1e-12"),
      ConfigError);
  const ExperimentConfig cfg =
      parse_config("fleet.K = 2\nchannel.gain_override = 1e-12, 2e-12");
  const auto fleet = cfg.build_fleet(1);
  CHECK(fleet[0].channel.gain_override == 1e-12);
  CHECK(fleet[1].channel.gain_override == 2e-12);
}

TEST_CASE("enumerated values are validated") {
  CHECK_THROWS_AS(parse_config("mode = XX"), ConfigError);
  CHECK_THROWS_AS(parse_config("opt.policy = H"), ConfigError);
  CHECK_THROWS_AS(parse_config("task.kind = dnn"), ConfigError);
  CHECK_THROWS_AS(parse_config("delta.estimator = hessian"), ConfigError);
  CHECK_THROWS_AS(parse_config("opt.tau_max = 0"), ConfigError);
  CHECK_THROWS_AS(parse_config("task.total_samples = 5\nfleet.K = 10"),
                  ConfigError);
  CHECK(parse_config("mode = FL").mode == mel::cost::OffloadMode::FL);
  CHECK(parse_config("opt.tau_max = auto").tau_max == 0);
  CHECK(parse_config("task.kind = quadratic").task_kind ==
        mel::learner::TaskKind::kQuadratic);
  CHECK(parse_config("delta.estimator = loss").delta_estimator ==
        mel::orch::DeltaEstimator::kLoss);
}

TEST_CASE("every schema key is consumable") {
  // Feeding each key its own default back must resolve cleanly; this keeps
  // the documented schema and the loader in lockstep.
  std::string text;
  for (const auto& key : schema()) {
    if (key.default_value.empty()) continue;  // optional, unset by default
    text += key.name + " = " + key.default_value + "\n";
  }
  CHECK_NOTHROW(parse_config(text));

  // Optional keys exist in the schema too.
  std::set<std::string> names;
  for (const auto& key : schema()) names.insert(key.name);
  CHECK(names.count("bounds.beta_override") == 1);
  CHECK(names.count("bounds.delta_override") == 1);
  CHECK(names.count("channel.gain_override") == 1);
  CHECK(names.size() == schema().size());  // no duplicate names
}

TEST_CASE("representative overrides land in the typed config") {
  const ExperimentConfig cfg = parse_config(
      "mode = FL\n"
      "channel.bandwidth_hz = 1e7\n"
      "channel.resample_per_cycle = true\n"
      "fleet.cpu_hz = 1e9\n"
      "model.complexity_cycles = 5e5\n"
      "model.size_per_sample = 0\n"
      "bounds.delta_override = 0.25\n"
      "opt.tau_hard_cap = 321\n"
      "task.dim = 3\n"
      "task.heterogeneity = 0.9\n"
      "task.seed = 99\n"
      "task.eval_samples = 123\n"
      "task.noise = 0.5\n"
      "task.sgd_shuffle = yes\n"
      "train.budget = 42.5\n");
  CHECK(cfg.mode == mel::cost::OffloadMode::FL);
  CHECK(cfg.bandwidth_hz == 1e7);
  CHECK(cfg.resample_per_cycle);
  CHECK(cfg.cpu_hz == std::vector<double>{1e9});
  CHECK(cfg.model.complexity_cycles == 5e5);
  CHECK(cfg.model.size_per_sample == 0.0);
  CHECK(cfg.delta_override == 0.25);
  CHECK(cfg.tau_hard_cap == 321);
  CHECK(cfg.task_dim == 3);
  CHECK(cfg.heterogeneity == 0.9);
  CHECK(cfg.seed == 99);
  CHECK(cfg.eval_samples == 123);
  CHECK(cfg.task_noise == 0.5);
  CHECK(cfg.sgd_shuffle);
  CHECK(cfg.train_budget_s == 42.5);

  const auto opt = cfg.train_options(mel::orch::Policy::HU, 42.5, 7);
  CHECK(opt.policy == mel::orch::Policy::HU);
  CHECK(opt.mode == mel::cost::OffloadMode::FL);
  CHECK(opt.budget_s == 42.5);
  CHECK(opt.seed == 7);
  CHECK(opt.delta_override == 0.25);
  CHECK(opt.resample_channels);

  const auto spec = cfg.task_spec(7);
  CHECK(spec.dim == 3);
  CHECK(spec.seed == 7);
  CHECK(spec.reshuffle_each_cycle);
}

TEST_CASE("comments and blank lines are ignored") {
  const ExperimentConfig cfg = parse_config(
      "# reference setup\n"
      "\n"
      "fleet.K = 5   # small fleet\n");
  CHECK(cfg.learners == 5);
}
