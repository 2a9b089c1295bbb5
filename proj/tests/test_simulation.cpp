#include <cmath>
#include <vector>

#include "doctest.h"
#include "qfl/errors.hpp"
#include "qfl/rng.hpp"
#include "qfl/simulation.hpp"

using namespace qfl;

namespace {

std::vector<double> row_values(const Eigen::MatrixXd& m, int t) {
  std::vector<double> out;
  for (int i = 0; i < m.cols(); ++i) out.push_back(m(t, i));
  return out;
}

double sample_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

TEST_CASE("phase boundaries split the day range evenly") {
  CHECK(phase_changepoints(10, PhaseLayout::two) == std::vector<int>{6});
  CHECK(phase_changepoints(10, PhaseLayout::five) == std::vector<int>{3, 5, 7, 9});
  CHECK(phase_changepoints(4, PhaseLayout::two) == std::vector<int>{3});
  CHECK(phase_changepoints(14, PhaseLayout::five) == std::vector<int>{4, 7, 9, 12});
  CHECK_THROWS_AS(phase_changepoints(3, PhaseLayout::two), ConfigError);
  CHECK_THROWS_AS(phase_changepoints(9, PhaseLayout::five), ConfigError);
}

TEST_CASE("default phase coefficients alternate with intercept shifts") {
  const auto two = default_phase_betas(PhaseLayout::two);
  REQUIRE(two.size() == 2);
  Eigen::Vector3d a(1.0, -1.0, 0.5), b(2.0, 0.5, -0.5), shift(0.75, 0.0, 0.0);
  CHECK(two[0] == a);
  CHECK(two[1] == b);

  const auto five = default_phase_betas(PhaseLayout::five);
  REQUIRE(five.size() == 5);
  CHECK(five[0] == a);
  CHECK(five[1] == b);
  CHECK(five[2] == Eigen::Vector3d(a + shift));
  CHECK(five[3] == Eigen::Vector3d(b - shift));
  CHECK(five[4] == Eigen::Vector3d(a - shift));
}

TEST_CASE("scenario generation is exact without noise and deterministic with it") {
  ScenarioConfig cfg;
  cfg.T = 10;
  cfg.n = 20;
  cfg.noise_scale = 0.0;
  cfg.seed = 99;
  GeneratedScenario scen = generate_scenario(cfg);

  REQUIRE(static_cast<int>(scen.data.strikes.size()) == 20);
  for (int i = 0; i < 20; ++i)
    CHECK(scen.data.strikes[i] == doctest::Approx(i / 19.0).epsilon(1e-15));

  const Eigen::MatrixXd X = build_design_rows(cfg.basis, scen.data.strikes);
  for (int t = 0; t < 10; ++t)
    for (int i = 0; i < 20; ++i)
      CHECK(scen.data.prices(t, i) == X.row(i).dot(scen.truth.betas[t]));

  // two-phase truth: days 1..5 phase A, days 6..10 phase B
  const auto betas = default_phase_betas(PhaseLayout::two);
  for (int t = 0; t < 5; ++t) CHECK(scen.truth.betas[t] == betas[0]);
  for (int t = 5; t < 10; ++t) CHECK(scen.truth.betas[t] == betas[1]);
  CHECK(scen.true_changepoints == std::vector<int>{6});

  cfg.noise_scale = 1.0;
  GeneratedScenario noisy1 = generate_scenario(cfg);
  GeneratedScenario noisy2 = generate_scenario(cfg);
  CHECK(noisy1.data.prices == noisy2.data.prices);
  cfg.seed = 100;
  GeneratedScenario other = generate_scenario(cfg);
  CHECK(noisy1.data.prices != other.data.prices);
}

TEST_CASE("five-phase truth assigns each day to its segment") {
  ScenarioConfig cfg;
  cfg.T = 10;
  cfg.n = 5;
  cfg.phases = PhaseLayout::five;
  cfg.noise_scale = 0.0;
  GeneratedScenario scen = generate_scenario(cfg);
  CHECK(scen.true_changepoints == std::vector<int>{3, 5, 7, 9});
  const auto betas = default_phase_betas(PhaseLayout::five);
  const int expect_phase[10] = {0, 0, 1, 1, 2, 2, 3, 3, 4, 4};
  for (int t = 0; t < 10; ++t) CHECK(scen.truth.betas[t] == betas[expect_phase[t]]);
}

TEST_CASE("scenario validation rejects inconsistent configs") {
  ScenarioConfig cfg;
  cfg.n = 1;
  CHECK_THROWS_AS(generate_scenario(cfg), ConfigError);

  cfg.n = 20;
  cfg.phase_betas = {Eigen::Vector3d(1, 0, 0)};  // two-phase needs 2 vectors
  CHECK_THROWS_AS(generate_scenario(cfg), ConfigError);

  cfg.phase_betas = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};  // basis p=3
  CHECK_THROWS_AS(generate_scenario(cfg), ConfigError);
}

TEST_CASE("per-row noise medians sit near zero for normal errors") {
  ScenarioConfig cfg;
  cfg.T = 10;
  cfg.n = 200;
  cfg.seed = 2034;
  GeneratedScenario scen = generate_scenario(cfg);
  const Eigen::MatrixXd X = build_design_rows(cfg.basis, scen.data.strikes);
  std::vector<double> pooled;
  for (int t = 0; t < 10; ++t) {
    std::vector<double> eps;
    for (int i = 0; i < 200; ++i)
      eps.push_back(scen.data.prices(t, i) - X.row(i).dot(scen.truth.betas[t]));
    CHECK(std::abs(sample_median(eps)) <= 0.12);
    pooled.insert(pooled.end(), eps.begin(), eps.end());
  }
  // pooled over all rows the bound is > 4 standard errors, so it holds for
  // any seed, not just this one
  CHECK(std::abs(sample_median(pooled)) <= 0.12);
}

TEST_CASE("both error generators put half their mass below zero") {
  const int N = 100000;
  const double bound = 3.0 * std::sqrt(0.25 / N);
  Rng rng(31);
  int neg_normal = 0, neg_cauchy = 0;
  for (int k = 0; k < N; ++k) neg_normal += rng.normal() < 0.0 ? 1 : 0;
  for (int k = 0; k < N; ++k) neg_cauchy += rng.cauchy() < 0.0 ? 1 : 0;
  CHECK(std::abs(neg_normal / static_cast<double>(N) - 0.5) <= bound);
  CHECK(std::abs(neg_cauchy / static_cast<double>(N) - 0.5) <= bound);
}

TEST_CASE("noiseless replication recovers the truth exactly") {
  ScenarioConfig cfg;
  cfg.T = 10;
  cfg.n = 100;
  cfg.noise_scale = 0.0;
  cfg.lambda_rule = LambdaRule::estimate;
  cfg.seed = 5;
  RepResult rep = run_once(cfg);
  CHECK(rep.converged);
  CHECK(rep.mad <= 1e-3);
  CHECK(rep.discovered == doctest::Approx(1.0));
  CHECK(rep.count_ratio == doctest::Approx(1.0));
  CHECK(rep.n_changepoints == 1);
  CHECK(std::abs(rep.med) <= 1e-6);
}

TEST_CASE("an overwhelming penalty suppresses every detection") {
  ScenarioConfig cfg;
  cfg.T = 10;
  cfg.n = 20;
  cfg.lambda_override = 10.0;
  cfg.seed = 17;
  RepResult rep = run_once(cfg);
  CHECK(rep.n_changepoints == 0);
  CHECK(rep.discovered == doctest::Approx(0.0));
  CHECK(rep.count_ratio == doctest::Approx(0.0));
  CHECK(std::isfinite(rep.med));
}

TEST_CASE("a single replication report equals the underlying run") {
  ScenarioConfig cfg;
  cfg.T = 10;
  cfg.n = 20;
  cfg.reps = 1;
  cfg.seed = 7;
  SimulationReport report = run_monte_carlo(cfg, 1);

  ScenarioConfig direct = cfg;
  direct.seed = derive_seed(7, 0);
  RepResult rep = run_once(direct);

  REQUIRE(report.replications.size() == 1);
  CHECK(report.replications[0].med == rep.med);
  CHECK(report.replications[0].mad == rep.mad);
  CHECK(report.replications[0].discovered == rep.discovered);
  CHECK(report.replications[0].count_ratio == rep.count_ratio);
  CHECK(report.mean_med == rep.med);
  CHECK(report.mean_mad == rep.mad);
  CHECK(report.mean_discovered == rep.discovered);
  CHECK(report.mean_count_ratio == rep.count_ratio);
  CHECK(report.lambda ==
        doctest::Approx(lambda_default(20, LambdaRule::detect)).epsilon(1e-15));
  CHECK(report.seed == 7);
}

TEST_CASE("reports are identical across thread counts and reruns") {
  ScenarioConfig cfg;
  cfg.T = 10;
  cfg.n = 20;
  cfg.reps = 6;
  cfg.seed = 11;
  SimulationReport serial = run_monte_carlo(cfg, 1);
  SimulationReport threaded = run_monte_carlo(cfg, 3);
  SimulationReport again = run_monte_carlo(cfg, 3);

  REQUIRE(serial.replications.size() == 6);
  REQUIRE(threaded.replications.size() == 6);
  for (int r = 0; r < 6; ++r) {
    CHECK(serial.replications[r].med == threaded.replications[r].med);
    CHECK(serial.replications[r].mad == threaded.replications[r].mad);
    CHECK(serial.replications[r].discovered == threaded.replications[r].discovered);
    CHECK(serial.replications[r].count_ratio == threaded.replications[r].count_ratio);
    CHECK(threaded.replications[r].med == again.replications[r].med);
    CHECK(threaded.replications[r].mad == again.replications[r].mad);
  }
  CHECK(serial.mean_med == threaded.mean_med);
  CHECK(serial.mean_mad == threaded.mean_mad);
  CHECK(serial.mean_discovered == threaded.mean_discovered);
  CHECK(serial.mean_count_ratio == threaded.mean_count_ratio);
  CHECK(serial.nonconverged == threaded.nonconverged);
}

TEST_CASE("quantile and squared losses both survive a cauchy draw") {
  ScenarioConfig cfg;
  cfg.T = 10;
  cfg.n = 20;
  cfg.errors = ErrorDist::cauchy;
  cfg.seed = 23;
  RepResult quantile_rep = run_once(cfg);
  cfg.loss = LossKind::squared;
  RepResult squared_rep = run_once(cfg);
  CHECK(std::isfinite(quantile_rep.mad));
  CHECK(std::isfinite(squared_rep.mad));
  CHECK(std::isfinite(quantile_rep.med));
  CHECK(std::isfinite(squared_rep.med));
}

TEST_CASE("monte carlo rejects an empty replication budget") {
  ScenarioConfig cfg;
  cfg.reps = 0;
  CHECK_THROWS_AS(run_monte_carlo(cfg, 1), ConfigError);
}

TEST_CASE("thread resolution honors explicit requests and the environment") {
  CHECK(resolve_thread_count(4) == 4);
  CHECK(resolve_thread_count(1) == 1);
  CHECK(resolve_thread_count(0) >= 1);
  CHECK(resolve_thread_count(-3) >= 1);
}
