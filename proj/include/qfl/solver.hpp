#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qfl/panel.hpp"

namespace qfl {

// prox of sigma * rho_tau at v: soft threshold with the asymmetric widths of
// the check loss.  Exactly zero on [-sigma (1 - tau), sigma tau].
double prox_check(double v, double tau, double sigma);
Eigen::VectorXd prox_check(const Eigen::VectorXd& v, double tau, double sigma);

// prox of kappa * ||.||_2 at v: block soft threshold, exactly zero when
// ||v|| <= kappa.
Eigen::VectorXd prox_group_l2(const Eigen::VectorXd& v, double kappa);

enum class OrthantSense { nonpositive, nonnegative };

Eigen::VectorXd project_orthant(const Eigen::VectorXd& v, OrthantSense sense);

struct SolverConfig {
  double rho = 1.0;              // splitting penalty
  int max_iters = 20000;
  double eps_abs = 1e-8;
  double eps_rel = 1e-6;
  double over_relaxation = 1.6;  // in [1, 1.9]
  bool adaptive_rho = false;     // residual balancing, off for reproducibility
  double feas_tol = 1e-7;        // shape violation allowed at convergence
  int record_objective_every = 0;  // 0 disables the trace
};

struct QflSolution {
  CoefficientPath path;
  std::vector<Eigen::VectorXd> thetas;  // T-1 jump estimates; exact zeros
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;  // sampled when recording is enabled
};

// Minimizes the panel objective by operator splitting.  The consensus
// variable stacks fitted values, per-day coefficient differences and shape
// rows; the coefficient update solves one cached regularized normal system
// and each block of the consensus update has a closed-form prox.  Changepoint
// estimates are read off the difference blocks, where the block soft
// threshold produces exact zeros.
QflSolution solve(const QflProblem& problem, const SolverConfig& config = {});

}  // namespace qfl
