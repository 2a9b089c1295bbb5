#include "qfl/solver.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>

#include "qfl/errors.hpp"

namespace qfl {

double prox_check(double v, double tau, double sigma) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (v > sigma * tau) return v - sigma * tau;
  if (v < -sigma * (1.0 - tau)) return v + sigma * (1.0 - tau);
  return 0.0;
}

Eigen::VectorXd prox_check(const Eigen::VectorXd& v, double tau, double sigma) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = prox_check(v[i], tau, sigma);
  return out;
}

Eigen::VectorXd prox_group_l2(const Eigen::VectorXd& v, double kappa) {
  if (!(kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
  const double norm = v.norm();
  if (norm <= kappa) return Eigen::VectorXd::Zero(v.size());
  return (1.0 - kappa / norm) * v;
}

Eigen::VectorXd project_orthant(const Eigen::VectorXd& v, OrthantSense sense) {
  return sense == OrthantSense::nonpositive ? v.cwiseMin(0.0).eval()
                                            : v.cwiseMax(0.0).eval();
}

namespace {

struct StackedOperator {
  Eigen::SparseMatrix<double> A;
  Eigen::Index rows_loss = 0;
  Eigen::Index off_theta = 0, rows_theta = 0;
  Eigen::Index off_d = 0, rows_d = 0;
  Eigen::Index off_c = 0, rows_c = 0;
};

// Row blocks: fitted values for each observed cell, then beta_t - beta_{t-1}
// per day, then shape rows replicated per day.
StackedOperator build_stack(const QflProblem& prob) {
  const int T = prob.T;
  const int p = prob.p();
  const Eigen::Index md = prob.D.rows();
  const Eigen::Index mc = prob.C.rows();

  StackedOperator s;
  s.rows_loss = static_cast<Eigen::Index>(prob.cells.size());
  s.off_theta = s.rows_loss;
  s.rows_theta = static_cast<Eigen::Index>(T - 1) * p;
  s.off_d = s.off_theta + s.rows_theta;
  s.rows_d = static_cast<Eigen::Index>(T) * md;
  s.off_c = s.off_d + s.rows_d;
  s.rows_c = static_cast<Eigen::Index>(T) * mc;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(s.rows_loss) * p +
                static_cast<std::size_t>(s.rows_theta) * 2 +
                static_cast<std::size_t>(s.rows_d + s.rows_c) * p);
  for (Eigen::Index r = 0; r < s.rows_loss; ++r) {
    const LossCell& cell = prob.cells[static_cast<std::size_t>(r)];
    for (int j = 0; j < p; ++j)
      trips.emplace_back(r, cell.t * p + j, prob.design(cell.i, j));
  }
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < p; ++j) {
      const Eigen::Index r = s.off_theta + static_cast<Eigen::Index>(t - 1) * p + j;
      trips.emplace_back(r, t * p + j, 1.0);
      trips.emplace_back(r, (t - 1) * p + j, -1.0);
    }
  for (int t = 0; t < T; ++t)
    for (Eigen::Index g = 0; g < md; ++g) {
      const Eigen::Index r = s.off_d + static_cast<Eigen::Index>(t) * md + g;
      for (int j = 0; j < p; ++j) trips.emplace_back(r, t * p + j, prob.D(g, j));
    }
  for (int t = 0; t < T; ++t)
    for (Eigen::Index g = 0; g < mc; ++g) {
      const Eigen::Index r = s.off_c + static_cast<Eigen::Index>(t) * mc + g;
      for (int j = 0; j < p; ++j) trips.emplace_back(r, t * p + j, prob.C(g, j));
    }

  s.A.resize(s.off_c + s.rows_c, static_cast<Eigen::Index>(T) * p);
  s.A.setFromTriplets(trips.begin(), trips.end());
  s.A.makeCompressed();
  return s;
}

double max_shape_violation(const QflProblem& prob, const Eigen::VectorXd& betavec) {
  const int p = prob.p();
  double worst = 0.0;
  for (int t = 0; t < prob.T; ++t) {
    const auto beta = betavec.segment(static_cast<Eigen::Index>(t) * p, p);
    if (prob.D.rows() > 0) worst = std::max(worst, (prob.D * beta).maxCoeff());
    if (prob.C.rows() > 0) worst = std::max(worst, (-(prob.C * beta)).maxCoeff());
  }
  return worst;
}

}  // namespace

QflSolution solve(const QflProblem& problem, const SolverConfig& config) {
  if (problem.T < 1) throw ConfigError("problem has no days");
  if (problem.cells.empty()) throw ConfigError("problem has no observed cells");
  if (!(config.rho > 0.0)) throw ConfigError("rho must be > 0");
  if (!(config.over_relaxation >= 1.0 && config.over_relaxation <= 1.9))
    throw ConfigError("over_relaxation must lie in [1, 1.9]");
  if (config.max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(config.eps_abs > 0.0) || !(config.eps_rel > 0.0))
    throw ConfigError("stopping tolerances must be > 0");

  const int T = problem.T;
  const int p = problem.p();
  const Eigen::Index nvar = static_cast<Eigen::Index>(T) * p;
  const double nlambda = problem.penalty_weight();
  const double alpha = config.over_relaxation;

  StackedOperator s = build_stack(problem);
  const Eigen::Index m = s.A.rows();

  Eigen::SparseMatrix<double> ata = Eigen::SparseMatrix<double>(s.A.transpose()) * s.A;
  double trace = 0.0;
  for (Eigen::Index j = 0; j < ata.outerSize(); ++j) trace += ata.coeff(j, j);
  Eigen::SparseMatrix<double> reg(nvar, nvar);
  reg.setIdentity();
  ata += (1e-10 * trace) * reg;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(ata);
  if (ldlt.info() != Eigen::Success)
    throw InternalError("normal equations factorization failed");

  double rho = config.rho;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  for (Eigen::Index r = 0; r < s.rows_loss; ++r)
    z[r] = problem.cells[static_cast<std::size_t>(r)].y;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd betavec = Eigen::VectorXd::Zero(nvar);
  Eigen::VectorXd abeta(m), relaxed(m), z_old(m);

  QflSolution sol;
  auto make_path = [&](const Eigen::VectorXd& bv) {
    CoefficientPath path;
    path.basis = problem.basis;
    path.betas.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
      path.betas.push_back(bv.segment(static_cast<Eigen::Index>(t) * p, p));
    return path;
  };

  int iter = 0;
  bool converged = false;
  double pri_norm = 0.0, dua_norm = 0.0;
  while (iter < config.max_iters) {
    ++iter;
    betavec = ldlt.solve(s.A.transpose() * (z - u));
    abeta = s.A * betavec;
    relaxed = alpha * abeta + (1.0 - alpha) * z;

    z_old.swap(z);
    const Eigen::VectorXd v = relaxed + u;
    for (Eigen::Index r = 0; r < s.rows_loss; ++r) {
      const double y = problem.cells[static_cast<std::size_t>(r)].y;
      if (problem.loss == LossKind::quantile)
        z[r] = y - prox_check(y - v[r], problem.tau, 1.0 / rho);
      else
        z[r] = (y + rho * v[r]) / (1.0 + rho);
    }
    for (int t = 1; t < T; ++t) {
      const Eigen::Index off = s.off_theta + static_cast<Eigen::Index>(t - 1) * p;
      z.segment(off, p) = prox_group_l2(v.segment(off, p), nlambda / rho);
    }
    if (s.rows_d > 0)
      z.segment(s.off_d, s.rows_d) = v.segment(s.off_d, s.rows_d).cwiseMin(0.0);
    if (s.rows_c > 0)
      z.segment(s.off_c, s.rows_c) = v.segment(s.off_c, s.rows_c).cwiseMax(0.0);

    u += relaxed - z;

    pri_norm = (abeta - z).norm();
    dua_norm = rho * (s.A.transpose() * (z - z_old)).norm();
    const double eps_pri = std::sqrt(static_cast<double>(m)) * config.eps_abs +
                           config.eps_rel * std::max(abeta.norm(), z.norm());
    const double eps_dua = std::sqrt(static_cast<double>(nvar)) * config.eps_abs +
                           config.eps_rel * rho * (s.A.transpose() * u).norm();

    if (config.record_objective_every > 0 && iter % config.record_objective_every == 0)
      sol.objective_trace.push_back(objective_value(problem, make_path(betavec)));

    if (pri_norm <= eps_pri && dua_norm <= eps_dua) {
      if (!problem.constraints.any() ||
          max_shape_violation(problem, betavec) <= config.feas_tol) {
        converged = true;
        break;
      }
    }

    if (config.adaptive_rho) {
      if (pri_norm > 10.0 * dua_norm) {
        rho *= 2.0;
        u *= 0.5;
      } else if (dua_norm > 10.0 * pri_norm) {
        rho *= 0.5;
        u *= 2.0;
      }
    }
  }

  sol.path = make_path(betavec);
  sol.thetas.reserve(static_cast<std::size_t>(T - 1));
  for (int t = 1; t < T; ++t)
    sol.thetas.push_back(z.segment(s.off_theta + static_cast<Eigen::Index>(t - 1) * p, p));
  sol.iterations = iter;
  sol.primal_residual = pri_norm;
  sol.dual_residual = dua_norm;
  sol.objective = objective_value(problem, sol.path);
  sol.converged = converged;
  return sol;
}

}  // namespace qfl
