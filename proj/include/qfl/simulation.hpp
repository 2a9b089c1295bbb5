#pragma once

#include <cstdint>
#include <vector>

#include "qfl/changepoint.hpp"
#include "qfl/panel.hpp"
#include "qfl/solver.hpp"

namespace qfl {

enum class PhaseLayout { two, five };
enum class ErrorDist { normal, cauchy };

// Monte Carlo scenario: a T-day panel over n strikes equispaced on [0, 1],
// quadratic truth per phase, additive iid noise.  Per-phase coefficient
// defaults alternate (1, -1, 0.5) and (2, 0.5, -0.5); the five-phase layout
// adds +-0.75 intercept shifts so every jump stays comparable in size.
struct ScenarioConfig {
  int T = 10;
  int n = 100;
  PhaseLayout phases = PhaseLayout::two;
  ErrorDist errors = ErrorDist::normal;
  LossKind loss = LossKind::quantile;
  double tau = 0.5;
  LambdaRule lambda_rule = LambdaRule::detect;
  double lambda_override = -1.0;  // >= 0 replaces the rule value
  double noise_scale = 1.0;       // 0 gives the noiseless debugging scenario
  bool refit = false;             // pooled refit per detected segment
  std::vector<Eigen::VectorXd> phase_betas;  // empty uses the defaults
  BasisSpec basis = make_polynomial_basis(2, 0.0, 1.0);
  std::uint64_t seed = 1;
  int reps = 1000;
  // Looser tolerances than the library defaults: each replication is one of
  // thousands and the recovery metrics are insensitive beyond this precision.
  SolverConfig solver{
      .eps_abs = 1e-6,
      .eps_rel = 1e-5,
  };
};

// Phase boundary days (1-based) for the layout: round(k T / K) + 1.
std::vector<int> phase_changepoints(int T, PhaseLayout phases);

std::vector<Eigen::VectorXd> default_phase_betas(PhaseLayout phases);

struct GeneratedScenario {
  PanelDataset data;
  CoefficientPath truth;
  std::vector<int> true_changepoints;  // 1-based days
};

GeneratedScenario generate_scenario(const ScenarioConfig& config);

struct RepResult {
  double med = 0.0;         // median residual of the final fit
  double mad = 0.0;         // mean |beta_hat - beta*| over days and coefficients
  double discovered = 0.0;  // fraction of true changepoints recovered exactly
  double count_ratio = 0.0; // detected / true changepoint count
  int n_changepoints = 0;
  bool converged = false;
};

// One replication: generate, solve, extract changepoints, optionally refit,
// score against the truth.
RepResult run_once(const ScenarioConfig& config);

struct SimulationReport {
  int T = 0, n = 0, reps = 0;
  PhaseLayout phases = PhaseLayout::two;
  ErrorDist errors = ErrorDist::normal;
  LossKind loss = LossKind::quantile;
  double tau = 0.5;
  double lambda = 0.0;
  bool refit = false;
  std::uint64_t seed = 0;
  double mean_med = 0.0, mean_mad = 0.0;
  double mean_discovered = 0.0, mean_count_ratio = 0.0;
  int nonconverged = 0;
  std::vector<RepResult> replications;
};

// Replications run on up to `threads` workers (0 reads QFL_THREADS, falling
// back to the hardware count).  Replication r always uses the seed derived
// from (config.seed, r) and aggregation runs in replication order, so the
// report does not depend on the thread count.
SimulationReport run_monte_carlo(const ScenarioConfig& config, int threads = 0);

int resolve_thread_count(int requested);

}  // namespace qfl
