#include "qfl/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "qfl/errors.hpp"
#include "qfl/rng.hpp"

namespace qfl {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) throw InternalError("median of an empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

int phase_count(PhaseLayout phases) { return phases == PhaseLayout::two ? 2 : 5; }

}  // namespace

std::vector<int> phase_changepoints(int T, PhaseLayout phases) {
  const int K = phase_count(phases);
  if (T < 2 * K) throw ConfigError("T is too short for the phase layout");
  std::vector<int> cps;
  for (int k = 1; k < K; ++k)
    cps.push_back(static_cast<int>(std::llround(static_cast<double>(k) * T / K)) + 1);
  return cps;
}

std::vector<Eigen::VectorXd> default_phase_betas(PhaseLayout phases) {
  Eigen::VectorXd a(3), b(3);
  a << 1.0, -1.0, 0.5;
  b << 2.0, 0.5, -0.5;
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(3);
  shift[0] = 0.75;
  if (phases == PhaseLayout::two) return {a, b};
  return {a, b, a + shift, b - shift, a - shift};
}

GeneratedScenario generate_scenario(const ScenarioConfig& config) {
  if (config.n < 2) throw ConfigError("scenario requires n >= 2 strikes");
  std::vector<Eigen::VectorXd> betas =
      config.phase_betas.empty() ? default_phase_betas(config.phases) : config.phase_betas;
  const int K = phase_count(config.phases);
  if (static_cast<int>(betas.size()) != K)
    throw ConfigError("phase coefficient count does not match the layout");
  for (const auto& beta : betas)
    if (beta.size() != config.basis.size())
      throw ConfigError("phase coefficients do not match the basis size");

  GeneratedScenario out;
  out.true_changepoints = phase_changepoints(config.T, config.phases);
  out.truth.basis = config.basis;
  std::vector<int> day_phase(static_cast<std::size_t>(config.T), 0);
  {
    int phase = 0;
    for (int t = 1; t <= config.T; ++t) {
      if (phase + 1 < K && t == out.true_changepoints[static_cast<std::size_t>(phase)])
        ++phase;
      day_phase[static_cast<std::size_t>(t - 1)] = phase;
    }
  }
  for (int t = 0; t < config.T; ++t)
    out.truth.betas.push_back(betas[static_cast<std::size_t>(day_phase[static_cast<std::size_t>(t)])]);

  out.data.strikes.resize(static_cast<std::size_t>(config.n));
  for (int i = 0; i < config.n; ++i)
    out.data.strikes[static_cast<std::size_t>(i)] =
        static_cast<double>(i) / static_cast<double>(config.n - 1);
  const Eigen::MatrixXd X = build_design_rows(config.basis, out.data.strikes);

  Rng rng(config.seed);
  out.data.prices.resize(config.T, config.n);
  out.data.observed.setConstant(config.T, config.n, true);
  for (int t = 0; t < config.T; ++t)
    for (int i = 0; i < config.n; ++i) {
      const double eps = config.errors == ErrorDist::normal ? rng.normal() : rng.cauchy();
      out.data.prices(t, i) = X.row(i).dot(out.truth.betas[static_cast<std::size_t>(t)]) +
                              config.noise_scale * eps;
    }
  return out;
}

RepResult run_once(const ScenarioConfig& config) {
  GeneratedScenario scen = generate_scenario(config);
  const double lambda = config.lambda_override >= 0.0
                            ? config.lambda_override
                            : lambda_default(config.n, config.lambda_rule);
  QflProblem prob = assemble_problem(scen.data, config.basis, config.tau, lambda,
                                     config.loss, ConstraintFlags{});
  QflSolution sol = solve(prob, config.solver);
  Segmentation seg = extract_changepoints(sol);

  CoefficientPath final_path = sol.path;
  if (config.refit)
    final_path = refit_segments(prob, sol.path, seg, config.solver).path;

  RepResult rep;
  rep.converged = sol.converged;
  rep.n_changepoints = static_cast<int>(seg.changepoints.size());

  const Eigen::MatrixXd fit = fitted_values(final_path, scen.data);
  std::vector<double> residuals;
  residuals.reserve(static_cast<std::size_t>(config.T) * config.n);
  for (int t = 0; t < config.T; ++t)
    for (int i = 0; i < config.n; ++i)
      residuals.push_back(scen.data.prices(t, i) - fit(t, i));
  rep.med = median(std::move(residuals));

  double mad = 0.0;
  for (int t = 0; t < config.T; ++t)
    mad += (final_path.betas[static_cast<std::size_t>(t)] -
            scen.truth.betas[static_cast<std::size_t>(t)])
               .cwiseAbs()
               .sum();
  rep.mad = mad / (static_cast<double>(config.T) * config.basis.size());

  const RecoveryMetrics rec = recovery_metrics(seg.changepoints, scen.true_changepoints);
  rep.discovered = rec.discovered;
  rep.count_ratio = rec.count_ratio;
  return rep;
}

int resolve_thread_count(int requested) {
  if (requested <= 0) {
    if (const char* env = std::getenv("QFL_THREADS")) {
      const int parsed = std::atoi(env);
      if (parsed > 0) requested = parsed;
    }
  }
  if (requested <= 0) requested = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, requested);
}

SimulationReport run_monte_carlo(const ScenarioConfig& config, int threads) {
  if (config.reps < 1) throw ConfigError("reps must be >= 1");
  SimulationReport report;
  report.T = config.T;
  report.n = config.n;
  report.reps = config.reps;
  report.phases = config.phases;
  report.errors = config.errors;
  report.loss = config.loss;
  report.tau = config.tau;
  report.lambda = config.lambda_override >= 0.0
                      ? config.lambda_override
                      : lambda_default(config.n, config.lambda_rule);
  report.refit = config.refit;
  report.seed = config.seed;
  report.replications.resize(static_cast<std::size_t>(config.reps));

  const int workers = std::min(resolve_thread_count(threads), config.reps);
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto work = [&](int w) {
    try {
      while (true) {
        const int r = next.fetch_add(1);
        if (r >= config.reps) break;
        ScenarioConfig rep_cfg = config;
        rep_cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
        report.replications[static_cast<std::size_t>(r)] = run_once(rep_cfg);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);

  for (const RepResult& rep : report.replications) {
    report.mean_med += rep.med;
    report.mean_mad += rep.mad;
    report.mean_discovered += rep.discovered;
    report.mean_count_ratio += rep.count_ratio;
    if (!rep.converged) ++report.nonconverged;
  }
  const double denom = static_cast<double>(config.reps);
  report.mean_med /= denom;
  report.mean_mad /= denom;
  report.mean_discovered /= denom;
  report.mean_count_ratio /= denom;
  return report;
}

}  // namespace qfl
