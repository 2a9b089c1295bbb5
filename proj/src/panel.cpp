#include "qfl/panel.hpp"

#include <cmath>

#include "qfl/errors.hpp"

namespace qfl {

void validate_panel(const PanelDataset& data) {
  const int T = data.T();
  const int n = data.n();
  if (T < 1 || n < 1) throw DataError("panel must have at least one day and one strike");
  if (static_cast<int>(data.strikes.size()) != n)
    throw DataError("strike list does not match the price matrix width");
  if (data.observed.rows() != T || data.observed.cols() != n)
    throw DataError("observation mask does not match the price matrix shape");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(data.strikes[i])) throw DataError("strikes must be finite");
    if (i > 0 && !(data.strikes[i] > data.strikes[i - 1]))
      throw DataError("strikes must be strictly ascending");
  }
  long seen = 0;
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i)
      if (data.observed(t, i)) {
        ++seen;
        if (!std::isfinite(data.prices(t, i)))
          throw DataError("observed prices must be finite");
      }
  if (seen == 0) throw DataError("panel has no observed cells");
}

double check_loss(double u, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

QflProblem assemble_problem(const PanelDataset& data, const BasisSpec& basis,
                            double tau, double lambda, LossKind loss,
                            ConstraintFlags constraints) {
  validate_panel(data);
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (data.strikes.front() < basis.lo || data.strikes.back() > basis.hi)
    throw DomainError("dataset strikes fall outside the basis domain");

  QflProblem prob;
  prob.design = build_design_rows(basis, data.strikes);
  prob.T = data.T();
  prob.tau = tau;
  prob.lambda = lambda;
  prob.loss = loss;
  prob.constraints = constraints;
  prob.basis = basis;
  prob.strikes = data.strikes;
  for (int t = 0; t < prob.T; ++t)
    for (int i = 0; i < data.n(); ++i)
      if (data.observed(t, i)) prob.cells.push_back({t, i, data.prices(t, i)});
  if (constraints.any()) {
    ShapeMatrices shape = build_shape_matrices(basis, data.strikes);
    prob.shape_grid = std::move(shape.grid);
    if (constraints.noninc) prob.D = std::move(shape.D);
    if (constraints.convex) prob.C = std::move(shape.C);
  }
  return prob;
}

double objective_value(const QflProblem& problem, const CoefficientPath& path) {
  if (path.T() != problem.T) throw UsageError("path length does not match the problem");
  double loss = 0.0;
  for (const LossCell& cell : problem.cells) {
    const double r = cell.y - problem.design.row(cell.i).dot(path.betas[cell.t]);
    loss += problem.loss == LossKind::quantile ? check_loss(r, problem.tau) : 0.5 * r * r;
  }
  double penalty = 0.0;
  for (int t = 1; t < problem.T; ++t)
    penalty += (path.betas[t] - path.betas[t - 1]).norm();
  return loss + problem.penalty_weight() * penalty;
}

Eigen::MatrixXd fitted_values(const CoefficientPath& path, const PanelDataset& data) {
  Eigen::MatrixXd X = build_design_rows(path.basis, data.strikes);
  Eigen::MatrixXd fit(data.T(), data.n());
  if (path.T() != data.T()) throw UsageError("path length does not match the panel");
  for (int t = 0; t < data.T(); ++t) fit.row(t) = (X * path.betas[t]).transpose();
  return fit;
}

FeasibilityReport feasibility_report(const CoefficientPath& path, const QflProblem& problem) {
  FeasibilityReport rep;
  for (const auto& beta : path.betas) {
    if (problem.D.rows() > 0)
      rep.max_noninc_violation =
          std::max(rep.max_noninc_violation, (problem.D * beta).maxCoeff());
    if (problem.C.rows() > 0)
      rep.max_convex_violation =
          std::max(rep.max_convex_violation, (-(problem.C * beta)).maxCoeff());
  }
  rep.max_noninc_violation = std::max(rep.max_noninc_violation, 0.0);
  rep.max_convex_violation = std::max(rep.max_convex_violation, 0.0);
  return rep;
}

}  // namespace qfl
