#include <doctest.h>

#include <cmath>
#include <random>

#include "mel/config.hpp"
#include "mel/errors.hpp"
#include "mel/experiment.hpp"
#include "mel/orchestrator.hpp"

using namespace mel::orch;
using mel::cost::LearnerProfile;
using mel::cost::OffloadMode;

namespace {

std::vector<LearnerProfile> small_fleet(std::size_t k_count,
                                        bool heterogeneous) {
  std::vector<LearnerProfile> fleet;
  for (std::size_t k = 0; k < k_count; ++k) {
    LearnerProfile p;
    p.id = k;
    p.cpu_hz = heterogeneous && k % 2 == 1 ? 0.6e9 : 2.4e9;
    p.channel.distance_m = 500.0;
    p.model.size_fixed = 3e5;
    p.model.size_per_sample = 1.0;
    p.model.complexity_cycles = 1e6;
    fleet.push_back(p);
  }
  return fleet;
}

mel::learner::TaskSpec small_task(std::size_t k_count, std::int64_t d,
                                  std::uint64_t seed) {
  mel::learner::TaskSpec spec;
  spec.kind = mel::learner::TaskKind::kLogistic;
  spec.dim = 4;
  spec.learners = k_count;
  spec.total_samples = d;
  spec.heterogeneity = 0.4;
  spec.seed = seed;
  spec.eval_samples = 500;
  return spec;
}

TrainOptions small_options(std::int64_t d, double budget) {
  TrainOptions opt;
  opt.total_samples = d;
  opt.budget_s = budget;
  opt.eta = 0.05;
  opt.b0 = 0.0075;
  opt.seed = 11;
  return opt;
}

}  // namespace

TEST_CASE("beta estimate on an identity-Hessian field is exactly one") {
  // F_k(w) = 0.5*|w|^2 has gradient w, so the secant ratio is 1.
  const std::vector<std::vector<double>> w_k{{1.0, 2.0}, {0.3, -0.4}};
  const std::vector<double> w{0.5, 0.5};
  const std::vector<std::vector<double>> grad_wk = w_k;
  const std::vector<std::vector<double>> grad_w{w, w};
  const auto est = estimate_beta(w_k, w, grad_wk, grad_w, {3, 5}, 9.9);
  CHECK(est.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(est.degenerate);

  // Single learner holding all samples reports its own ratio.
  const auto solo = estimate_beta({w_k[0]}, w, {grad_wk[0]}, {grad_w[0]}, {8}, 9.9);
  CHECK(solo.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("beta estimate respects Hessian eigenvalue bounds") {
  // Gradient field of 0.5*(x^2 + 4 y^2): secant ratios live in [1, 4].
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> w{normal(rng), normal(rng)};
    const std::vector<double> wk{w[0] + normal(rng), w[1] + normal(rng)};
    const std::vector<double> gw{w[0], 4.0 * w[1]};
    const std::vector<double> gwk{wk[0], 4.0 * wk[1]};
    const auto est = estimate_beta({wk}, w, {gwk}, {gw}, {4}, 1.0);
    if (est.degenerate) continue;
    CHECK(est.value >= 1.0 - 1e-9);
    CHECK(est.value <= 4.0 + 1e-9);
  }
}

TEST_CASE("beta estimate falls back to the warm value when degenerate") {
  const std::vector<double> w{1.0, 1.0};
  const auto est =
      estimate_beta({w, w}, w, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, {2, 2}, 3.25);
  CHECK(est.degenerate);
  CHECK(est.value == 3.25);
}

TEST_CASE("delta estimate: gradient divergence") {
  // dF_1 = (1,0), dF_2 = (0,1), equal weights -> mean (.5,.5), delta = sqrt(.5).
  const std::vector<std::vector<double>> grads{{1.0, 0.0}, {0.0, 1.0}};
  CHECK(estimate_delta_gradient(grads, {4, 4}) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

  // Identical gradients mean zero divergence.
  CHECK(estimate_delta_gradient({{0.7, -0.2}, {0.7, -0.2}}, {3, 9}) ==
        doctest::Approx(0.0));

  // Invariant under learner reindexing.
  const std::vector<std::vector<double>> shuffled{{0.0, 1.0}, {1.0, 0.0}};
  CHECK(estimate_delta_gradient(shuffled, {4, 4}) ==
        doctest::Approx(estimate_delta_gradient(grads, {4, 4})));
}

TEST_CASE("delta estimate: loss divergence") {
  CHECK(estimate_delta_loss({0.2, 0.4}, {1, 1}) == doctest::Approx(0.1));
  CHECK(estimate_delta_loss({0.3, 0.3, 0.3}, {1, 2, 3}) == doctest::Approx(0.0));
}

TEST_CASE("aggregation is the weighted mean") {
  CHECK(aggregate({{1.0, 3.0}, {3.0, 5.0}}, {2, 2}) ==
        std::vector<double>{2.0, 4.0});
  CHECK(aggregate({{0.25, -1.0}}, {7}) == std::vector<double>{0.25, -1.0});
  CHECK(aggregate({{0.0}, {4.0}}, {1, 3}) == std::vector<double>{3.0});
  CHECK_THROWS_AS(aggregate({{1.0}, {2.0}}, {0, 0}), std::invalid_argument);

  // Weight conservation: averaging copies of one vector returns it.
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> weight(1, 1000);
  const std::vector<double> v{0.123, -4.56, 7.89};
  for (int i = 0; i < 100; ++i) {
    const std::vector<std::int64_t> d{weight(rng), weight(rng), weight(rng)};
    const auto mean = aggregate({v, v, v}, d);
    for (std::size_t j = 0; j < v.size(); ++j) {
      CHECK(mean[j] == doctest::Approx(v[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("auto tau_max follows the three-cycle rule") {
  const auto fleet = small_fleet(4, true);
  const std::int64_t d = 4000;

  // Scan oracle over the defining inequality.
  const auto oracle = [&](double budget) {
    const double dk = static_cast<double>(d) / 4.0;
    double max_c = 0.0, max_sr = 0.0;
    for (const auto& p : fleet) {
      max_c = std::max(max_c, mel::cost::time_compute(p, dk));
      max_sr = std::max(max_sr, mel::cost::time_send(p, dk, OffloadMode::OL) +
                                    mel::cost::time_receive(p, dk));
    }
    std::int64_t tau = 1;
    while (3.0 * ((tau + 1) * max_c + max_sr) <= budget) ++tau;
    return tau;
  };

  for (const double budget : {50.0, 300.0, 1234.5}) {
    CHECK(auto_tau_max(fleet, OffloadMode::OL, d, budget, 100000) ==
          oracle(budget));
  }
  // Doubling T at least doubles tau_max (up to flooring).
  const std::int64_t t1 = auto_tau_max(fleet, OffloadMode::OL, d, 200.0, 1 << 30);
  const std::int64_t t2 = auto_tau_max(fleet, OffloadMode::OL, d, 400.0, 1 << 30);
  CHECK(t2 >= 2 * t1);
  // Unbounded budget hits the hard cap; tiny budget floors at one.
  CHECK(auto_tau_max(fleet, OffloadMode::OL, d, 1e12, 10000) == 10000);
  CHECK(auto_tau_max(fleet, OffloadMode::OL, d, 1e-6, 10000) == 1);

  // Reference 20-learner fleet at T = 300 s, against the same scan oracle.
  const auto cfg = mel::config::default_config();
  const auto reference = cfg.build_fleet(cfg.seed);
  const double dk20 = 54000.0 / 20.0;
  double max_c = 0.0, max_sr = 0.0;
  for (const auto& p : reference) {
    max_c = std::max(max_c, mel::cost::time_compute(p, dk20));
    max_sr = std::max(max_sr, mel::cost::time_send(p, dk20, OffloadMode::OL) +
                                  mel::cost::time_receive(p, dk20));
  }
  std::int64_t scan = 1;
  while (3.0 * ((scan + 1) * max_c + max_sr) <= 300.0) ++scan;
  CHECK(auto_tau_max(reference, OffloadMode::OL, 54000, 300.0, 10000) == scan);
}

TEST_CASE("training stops cleanly when even one round cannot fit") {
  auto fleet = small_fleet(3, false);
  mel::learner::SyntheticTask task(small_task(3, 300, 1));
  auto opt = small_options(300, 1e-3);  // far below one exchange
  const auto report = run_training(fleet, task, opt);
  CHECK(report.rounds.empty());
  CHECK(report.termination == "infeasible_first_round");
  CHECK(report.total_time_s == 0.0);
  CHECK(std::isfinite(report.final_eval_loss));
}

TEST_CASE("homogeneous fleet: HA and HU run identically") {
  auto fleet = small_fleet(4, false);
  const std::int64_t d = 4000;  // divisible by K
  auto opt = small_options(d, 120.0);

  mel::learner::SyntheticTask task_ha(small_task(4, d, 9));
  opt.policy = Policy::HA;
  const auto ha = run_training(fleet, task_ha, opt);

  mel::learner::SyntheticTask task_hu(small_task(4, d, 9));
  opt.policy = Policy::HU;
  const auto hu = run_training(fleet, task_hu, opt);

  REQUIRE(ha.rounds.size() == hu.rounds.size());
  for (std::size_t g = 0; g < ha.rounds.size(); ++g) {
    CHECK(ha.rounds[g].tau == hu.rounds[g].tau);
    CHECK(ha.rounds[g].batches == hu.rounds[g].batches);
    CHECK(ha.rounds[g].global_loss == hu.rounds[g].global_loss);
  }
  CHECK(ha.final_eval_loss == hu.final_eval_loss);
}

TEST_CASE("heterogeneous fleet: HA reaches a lower loss than HU") {
  auto fleet = small_fleet(6, true);
  const std::int64_t d = 6000;
  auto opt = small_options(d, 200.0);

  mel::learner::SyntheticTask task_ha(small_task(6, d, 21));
  opt.policy = Policy::HA;
  const auto ha = run_training(fleet, task_ha, opt);

  mel::learner::SyntheticTask task_hu(small_task(6, d, 21));
  opt.policy = Policy::HU;
  const auto hu = run_training(fleet, task_hu, opt);

  REQUIRE_FALSE(ha.rounds.empty());
  REQUIRE_FALSE(hu.rounds.empty());
  CHECK(ha.final_eval_loss <= hu.final_eval_loss);
}

TEST_CASE("budget safety and per-round feasibility") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 6; ++i) {
    const std::size_t k_count = 2 + i;
    const std::int64_t d = 1000 * static_cast<std::int64_t>(k_count);
    auto fleet = small_fleet(k_count, i % 2 == 0);
    auto opt = small_options(d, 20.0 + 300.0 * uni(rng));
    opt.policy = i % 2 == 0 ? Policy::HA : Policy::HU;
    opt.seed = 100 + i;
    mel::learner::SyntheticTask task(small_task(k_count, d, 100 + i));
    const auto report = run_training(fleet, task, opt);

    double spent = 0.0;
    for (const auto& log : report.rounds) {
      // Each cycle fits the budget remaining when it was dispatched.
      CHECK(log.max_time_s <= opt.budget_s - spent + 1e-9);
      spent += log.max_time_s;
    }
    CHECK(spent <= opt.budget_s + 1e-9);
    CHECK(report.total_time_s == doctest::Approx(spent));
  }
}

TEST_CASE("training runs are deterministic") {
  auto fleet = small_fleet(4, true);
  const std::int64_t d = 4000;
  auto opt = small_options(d, 150.0);
  opt.policy = Policy::HA;

  mel::learner::SyntheticTask task_a(small_task(4, d, 77));
  const auto a = run_training(fleet, task_a, opt);
  mel::learner::SyntheticTask task_b(small_task(4, d, 77));
  const auto b = run_training(fleet, task_b, opt);

  CHECK(mel::experiment::round_log_csv(a.rounds) ==
        mel::experiment::round_log_csv(b.rounds));
  CHECK(a.final_eval_loss == b.final_eval_loss);
  CHECK(a.final_w == b.final_w);
}

TEST_CASE("fixed delta and tau_max pin the re-optimized tau") {
  auto fleet = small_fleet(4, true);
  const std::int64_t d = 4000;
  auto opt = small_options(d, 240.0);
  opt.delta_override = 0.0;
  opt.tau_max = 25;
  mel::learner::SyntheticTask task(small_task(4, d, 5));
  const auto report = run_training(fleet, task, opt);
  REQUIRE(report.rounds.size() >= 3);
  // Round 1 is the bootstrap; every re-optimized round picks the same tau
  // except a final budget-driven reduction.
  const std::int64_t tau_star = report.rounds[1].tau;
  for (std::size_t g = 1; g + 1 < report.rounds.size(); ++g) {
    CHECK(report.rounds[g].tau == tau_star);
  }
  CHECK(report.rounds.front().tau == 1);
  for (const auto& log : report.rounds) {
    CHECK(log.delta == 0.0);
  }
}

TEST_CASE("beta override propagates into the logs") {
  auto fleet = small_fleet(3, false);
  const std::int64_t d = 3000;
  auto opt = small_options(d, 100.0);
  opt.beta_override = 0.42;
  mel::learner::SyntheticTask task(small_task(3, d, 13));
  const auto report = run_training(fleet, task, opt);
  REQUIRE_FALSE(report.rounds.empty());
  for (const auto& log : report.rounds) {
    CHECK(log.beta == 0.42);
  }
  // First round executes the bootstrap plan and carries no bound value yet.
  CHECK(std::isnan(report.rounds.front().bound));
  if (report.rounds.size() > 1) {
    CHECK(std::isfinite(report.rounds[1].bound));
  }
}
