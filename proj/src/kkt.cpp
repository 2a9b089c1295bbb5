#include "qfl/kkt.hpp"

#include <algorithm>
#include <cmath>

#include "qfl/changepoint.hpp"
#include "qfl/errors.hpp"

namespace qfl {

namespace {

double default_tie_tol(const QflProblem& prob) {
  double scale = 1.0;
  for (const LossCell& cell : prob.cells) scale = std::max(scale, std::abs(cell.y));
  return 1e-6 * scale;
}

// Loss subgradient with respect to the jump into day t0 (0-based):
// tau sum_{k >= t0} x_i minus the indicator-weighted sum.  `weak` counts
// cells within tie_tol of an exact fit, `strict` does not; `tied` holds the
// design row of each such cell, since every tied indicator may take either
// value independently of the others.
struct GradSet {
  Eigen::VectorXd weak;
  Eigen::VectorXd strict;
  std::vector<Eigen::VectorXd> tied;
};

GradSet loss_gradients(const QflSolution& sol, const QflProblem& prob, int t0,
                       double tie_tol) {
  GradSet g{Eigen::VectorXd::Zero(prob.p()), Eigen::VectorXd::Zero(prob.p()), {}};
  for (const LossCell& cell : prob.cells) {
    if (cell.t < t0) continue;
    const Eigen::VectorXd x = prob.design.row(cell.i).transpose();
    const double r = cell.y - prob.design.row(cell.i).dot(sol.path.betas[cell.t]);
    g.weak += prob.tau * x;
    g.strict += prob.tau * x;
    if (r <= tie_tol) g.weak -= x;
    if (r < -tie_tol)
      g.strict -= x;
    else if (r <= tie_tol && !x.isZero(0.0))
      g.tied.push_back(x);
  }
  return g;
}

// Distance from q to the subgradient set {strict - sum_i c_i tied_i,
// c in [0,1]^k}: a box-constrained least squares solved by exact cyclic
// coordinate minimization, which is deterministic and converges on this
// convex quadratic.
double subgradient_distance(const Eigen::VectorXd& q, const GradSet& g) {
  Eigen::VectorXd resid = g.strict - q;
  std::vector<double> c(g.tied.size(), 0.0);
  for (int sweep = 0; sweep < 400; ++sweep) {
    double moved = 0.0;
    for (std::size_t i = 0; i < g.tied.size(); ++i) {
      const Eigen::VectorXd& x = g.tied[i];
      const double step = x.dot(resid) / x.squaredNorm();
      const double next = std::clamp(c[i] + step, 0.0, 1.0);
      const double delta = next - c[i];
      if (delta == 0.0) continue;
      resid -= delta * x;
      c[i] = next;
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < 1e-15) break;
  }
  return resid.norm();
}

void require_quantile(const QflProblem& prob) {
  if (prob.loss != LossKind::quantile)
    throw UsageError("optimality certificate requires the quantile loss");
}

KktCheck active_check(const QflSolution& sol, const QflProblem& prob, int day,
                      double tie_tol) {
  const std::size_t k = static_cast<std::size_t>(day) - 2;
  const Eigen::VectorXd& theta = sol.thetas[k];
  const Eigen::VectorXd target = prob.penalty_weight() * theta / theta.norm();
  const GradSet g = loss_gradients(sol, prob, day - 1, tie_tol);
  KktCheck c;
  c.day = day;
  c.weak = (g.weak - target).norm();
  c.strict = (g.strict - target).norm();
  c.robust = subgradient_distance(target, g);
  return c;
}

KktCheck inactive_check(const QflSolution& sol, const QflProblem& prob, int day,
                        double tie_tol) {
  const double nlambda = prob.penalty_weight();
  const GradSet g = loss_gradients(sol, prob, day - 1, tie_tol);
  KktCheck c;
  c.day = day;
  c.weak = nlambda - g.weak.norm();
  c.strict = nlambda - g.strict.norm();
  c.robust = nlambda - subgradient_distance(Eigen::VectorXd::Zero(prob.p()), g);
  return c;
}

}  // namespace

double kkt_active(const QflSolution& sol, const QflProblem& problem, int day,
                  double tie_tol) {
  require_quantile(problem);
  if (day < 2 || day > problem.T) throw UsageError("changepoint day must lie in [2, T]");
  if (sol.thetas[static_cast<std::size_t>(day) - 2].isZero(0.0))
    throw UsageError("no active changepoint at this day");
  if (tie_tol < 0.0) tie_tol = default_tie_tol(problem);
  return active_check(sol, problem, day, tie_tol).robust;
}

double kkt_inactive(const QflSolution& sol, const QflProblem& problem, int day,
                    double tie_tol) {
  require_quantile(problem);
  if (day < 1 || day > problem.T) throw UsageError("day must lie in [1, T]");
  if (tie_tol < 0.0) tie_tol = default_tie_tol(problem);
  return inactive_check(sol, problem, day, tie_tol).robust;
}

KktReport audit(const QflSolution& sol, const QflProblem& problem, double tol) {
  KktReport rep;
  rep.tolerance = tol;
  if (problem.loss != LossKind::quantile) {
    rep.applicable = false;
    rep.pass = false;
    rep.note = "certificate inapplicable: fit does not use the quantile loss";
    return rep;
  }
  const double tie_tol = default_tie_tol(problem);
  const double slack = tol * std::max(1.0, problem.penalty_weight());

  const Segmentation seg = extract_changepoints(sol);
  bool ok = true;
  for (int day : seg.changepoints) {
    rep.active_residuals.push_back(active_check(sol, problem, day, tie_tol));
    ok = ok && rep.active_residuals.back().robust <= slack;
  }
  for (int day = 1; day <= problem.T; ++day) {
    rep.inactive_margins.push_back(inactive_check(sol, problem, day, tie_tol));
    ok = ok && rep.inactive_margins.back().robust >= -slack;
  }
  rep.pass = ok;

  if (problem.constraints.any()) {
    for (const auto& beta : sol.path.betas) {
      if (problem.D.rows() > 0 && (problem.D * beta).maxCoeff() >= -1e-8)
        rep.constraints_active = true;
      if (problem.C.rows() > 0 && (problem.C * beta).minCoeff() <= 1e-8)
        rep.constraints_active = true;
    }
    if (rep.constraints_active)
      rep.note = "shape constraints are binding: certificate is advisory";
  }
  return rep;
}

}  // namespace qfl
