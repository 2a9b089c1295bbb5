#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qfl/basis.hpp"

namespace qfl {

// Option panel: one row per day, one column per strike.  Strikes are sorted
// and distinct; observed(t, i) marks cells that carry a price.  Prices in
// unobserved cells are ignored everywhere.
struct PanelDataset {
  std::vector<double> strikes;
  Eigen::MatrixXd prices;                              // T x n
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed;  // T x n

  int T() const { return static_cast<int>(prices.rows()); }
  int n() const { return static_cast<int>(prices.cols()); }
  long observed_count() const { return observed.count(); }
};

// Throws DataError if the panel is structurally invalid (shape mismatch,
// unsorted strikes, non-finite observed prices, no observed cells).
void validate_panel(const PanelDataset& data);

// Per-day coefficient vectors relative to `basis`.
struct CoefficientPath {
  std::vector<Eigen::VectorXd> betas;  // T vectors of length basis.size()
  BasisSpec basis;

  int T() const { return static_cast<int>(betas.size()); }
};

enum class LossKind { quantile, squared };

struct ConstraintFlags {
  bool noninc = false;  // phi'(g)^T beta_t <= 0 on the shape grid
  bool convex = false;  // phi''(g)^T beta_t >= 0 on the shape grid
  bool any() const { return noninc || convex; }
};

// Check loss rho_tau(u) = u (tau - 1{u < 0}); squared loss uses u^2 / 2.
double check_loss(double u, double tau);

// One observed cell of the panel, as used by the loss term.  `t` and `i`
// index the coefficient block and design row.
struct LossCell {
  int t;
  int i;
  double y;
};

// Fully assembled estimation problem.  The fused penalty enters the
// objective with weight n * lambda, n being the number of strikes.
struct QflProblem {
  Eigen::MatrixXd design;      // n x p, rows phi(x_i)^T
  int T = 0;
  std::vector<LossCell> cells; // day-major order
  Eigen::MatrixXd D;           // shape rows, empty unless noninc
  Eigen::MatrixXd C;           // shape rows, empty unless convex
  std::vector<double> shape_grid;
  double tau = 0.5;
  double lambda = 0.0;
  LossKind loss = LossKind::quantile;
  ConstraintFlags constraints;
  BasisSpec basis;
  std::vector<double> strikes;

  int p() const { return static_cast<int>(design.cols()); }
  double penalty_weight() const { return static_cast<double>(strikes.size()) * lambda; }
};

// Builds design rows and shape matrices for the dataset.  The shape grid is
// the observed strikes (build_shape_matrices augments it for degree-2
// splines).  tau must lie in (0, 1), lambda must be >= 0, and every strike
// must fall inside the basis domain.
QflProblem assemble_problem(const PanelDataset& data, const BasisSpec& basis,
                            double tau, double lambda, LossKind loss,
                            ConstraintFlags constraints);

// Sum of per-cell losses plus n * lambda * sum_t ||beta_t - beta_{t-1}||_2.
double objective_value(const QflProblem& problem, const CoefficientPath& path);

// phi(x_i)^T beta_t for every cell, observed or not.  T x n.
Eigen::MatrixXd fitted_values(const CoefficientPath& path, const PanelDataset& data);

struct FeasibilityReport {
  double max_noninc_violation = 0.0;  // max over t, grid of (phi' beta_t)_+
  double max_convex_violation = 0.0;  // max over t, grid of (-phi'' beta_t)_+
  double worst() const { return std::max(max_noninc_violation, max_convex_violation); }
};

FeasibilityReport feasibility_report(const CoefficientPath& path, const QflProblem& problem);

}  // namespace qfl
