#include "qfl/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "qfl/changepoint.hpp"
#include "qfl/errors.hpp"
#include "qfl/io.hpp"
#include "qfl/kkt.hpp"
#include "qfl/simulation.hpp"

namespace qfl {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNoConvergence = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double parse_lambda(const std::string& text, long n_cells) {
  if (text == "auto-detect") return lambda_default(n_cells, LambdaRule::detect);
  if (text == "auto-estimate") return lambda_default(n_cells, LambdaRule::estimate);
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ConfigError("--lambda expects a number, 'auto-detect' or 'auto-estimate'");
  }
}

ConstraintFlags parse_constraints(const std::string& text) {
  ConstraintFlags flags;
  if (text == "none") return flags;
  std::istringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token == "noninc")
      flags.noninc = true;
    else if (token == "convex")
      flags.convex = true;
    else
      throw ConfigError("--constraints accepts 'none' or a list of noninc,convex");
  }
  return flags;
}

std::vector<int> parse_days(const std::string& text) {
  std::vector<int> days;
  if (text.empty()) return days;
  std::istringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    try {
      std::size_t used = 0;
      const int day = std::stoi(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      days.push_back(day);
    } catch (const std::exception&) {
      throw ConfigError("--times expects a comma-separated list of day numbers");
    }
  }
  return days;
}

struct EstimateOptions {
  std::string input, out = "fit.json";
  double tau = 0.5;
  std::string lambda = "auto-detect";
  std::string basis = "spline";
  int degree = 2;
  std::string knots = "auto";
  std::string constraints = "noninc,convex";
  std::string loss = "quantile";
  bool refit = false;
};

LossKind parse_loss(const std::string& text) {
  if (text == "quantile") return LossKind::quantile;
  if (text == "squared") return LossKind::squared;
  throw ConfigError("--loss must be 'quantile' or 'squared'");
}

int run_estimate(const EstimateOptions& opt, std::ostream& err) {
  const std::string bytes = read_file(opt.input);
  std::istringstream stream(bytes);
  const PanelDataset data = parse_option_chain(stream);

  BasisSpec basis;
  if (opt.basis == "poly") {
    basis = make_polynomial_basis(opt.degree, data.strikes.front(), data.strikes.back());
  } else if (opt.basis == "spline") {
    int knot_count = 0;
    if (opt.knots == "auto") {
      knot_count = default_knot_count(data.n());
    } else {
      try {
        std::size_t used = 0;
        knot_count = std::stoi(opt.knots, &used);
        if (used != opt.knots.size() || knot_count < 0) throw std::invalid_argument(opt.knots);
      } catch (const std::exception&) {
        throw ConfigError("--knots expects 'auto' or a nonnegative integer");
      }
    }
    basis = make_truncated_spline_basis(opt.degree, choose_knots(data.strikes, knot_count),
                                        data.strikes.front(), data.strikes.back());
  } else {
    throw ConfigError("--basis must be 'spline' or 'poly'");
  }
  basis = rescaled_to_unit(basis);

  const double lambda = parse_lambda(opt.lambda, data.observed_count());
  const ConstraintFlags flags = parse_constraints(opt.constraints);
  const LossKind loss = parse_loss(opt.loss);
  const QflProblem prob = assemble_problem(data, basis, opt.tau, lambda, loss, flags);
  // Stock tolerances, but a budget large enough that real chains converge
  // rather than exiting 3 at the default cap.
  SolverConfig solver_cfg;
  solver_cfg.max_iters = 200000;
  const QflSolution sol = solve(prob, solver_cfg);
  const Segmentation seg = extract_changepoints(sol);

  FitArtifact fit;
  fit.basis = basis;
  fit.tau = opt.tau;
  fit.lambda = lambda;
  fit.loss = loss;
  fit.constraints = flags;
  fit.betas = sol.path.betas;
  fit.thetas = sol.thetas;
  fit.changepoints = seg.changepoints;
  fit.segments = seg.segments;
  fit.converged = sol.converged;
  fit.iterations = sol.iterations;
  fit.objective = sol.objective;
  fit.primal_residual = sol.primal_residual;
  fit.dual_residual = sol.dual_residual;
  fit.input_rows = data.observed_count();
  fit.input_strike_lo = data.strikes.front();
  fit.input_strike_hi = data.strikes.back();
  fit.input_hash = file_fingerprint_hash(bytes);

  if (opt.refit) {
    const RefitResult refit = refit_segments(prob, sol.path, seg);
    fit.refit_applied = true;
    fit.penalized_betas = sol.path.betas;
    fit.betas = refit.path.betas;
    for (std::size_t s = 0; s < refit.refit_ok.size(); ++s)
      if (!refit.refit_ok[s])
        err << "note: segment " << seg.segments[s].first << ".." << seg.segments[s].second
            << " has fewer observations than coefficients; kept the penalized fit\n";
  }

  save_fit(fit, opt.out);

  err << "days: " << data.T() << "  strikes: " << data.n()
      << "  observed cells: " << data.observed_count() << '\n';
  err << "lambda: " << lambda << "  effective penalty (n*lambda): " << prob.penalty_weight()
      << '\n';
  err << "solver: " << (sol.converged ? "converged" : "NOT converged") << " after "
      << sol.iterations << " iterations, objective " << sol.objective << '\n';
  if (flags.any()) {
    const FeasibilityReport feas = feasibility_report(fit.path(), prob);
    err << "max shape violation: " << feas.worst() << '\n';
  }
  err << "changepoints (" << seg.changepoints.size() << "):";
  for (int day : seg.changepoints) err << ' ' << day;
  err << "\nwrote " << opt.out << '\n';
  if (!sol.converged) {
    err << "warning: iteration limit reached before the tolerances were met\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

struct SimulateOptions {
  std::string phases = "two";
  int n = 100;
  int T = 10;
  std::string dist = "normal";
  std::string loss = "quantile";
  int reps = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int run_simulate(const SimulateOptions& opt, std::ostream& out_stream, std::ostream& err) {
  ScenarioConfig cfg;
  if (opt.phases == "two")
    cfg.phases = PhaseLayout::two;
  else if (opt.phases == "five")
    cfg.phases = PhaseLayout::five;
  else
    throw ConfigError("--phases must be 'two' or 'five'");
  if (opt.dist == "normal")
    cfg.errors = ErrorDist::normal;
  else if (opt.dist == "cauchy")
    cfg.errors = ErrorDist::cauchy;
  else
    throw ConfigError("--dist must be 'normal' or 'cauchy'");
  if (opt.loss == "quantile")
    cfg.loss = LossKind::quantile;
  else if (opt.loss == "squared")
    cfg.loss = LossKind::squared;
  else
    throw ConfigError("--loss must be 'quantile' or 'squared'");
  cfg.n = opt.n;
  cfg.T = opt.T;
  cfg.reps = opt.reps;
  cfg.seed = opt.seed;

  const SimulationReport report = run_monte_carlo(cfg);
  out_stream << simulation_report_table(report);
  if (!opt.out.empty()) {
    atomic_write_file(opt.out, simulation_report_json(report));
    err << "wrote " << opt.out << '\n';
  }
  return kExitOk;
}

struct AuditOptions {
  std::string fit, input;
  double tol = 1e-3;
};

int run_audit(const AuditOptions& opt, std::ostream& out, std::ostream& err) {
  const FitArtifact fit = load_fit(opt.fit);
  const std::string bytes = read_file(opt.input);
  if (file_fingerprint_hash(bytes) != fit.input_hash)
    throw DataError("input file does not match the fingerprint stored in the fit");
  std::istringstream stream(bytes);
  const PanelDataset data = parse_option_chain(stream);
  const QflProblem prob =
      assemble_problem(data, fit.basis, fit.tau, fit.lambda, fit.loss, fit.constraints);

  QflSolution sol;
  sol.path.basis = fit.basis;
  sol.path.betas = fit.refit_applied ? fit.penalized_betas : fit.betas;
  sol.thetas = fit.thetas;
  const KktReport report = audit(sol, prob, opt.tol);

  if (!report.applicable) {
    err << report.note << '\n';
    return kExitUsage;
  }
  out << "tolerance: " << report.tolerance
      << "  scaled slack: " << report.tolerance * std::max(1.0, prob.penalty_weight()) << '\n';
  for (const KktCheck& check : report.active_residuals)
    out << "changepoint day " << check.day << ": stationarity residual " << check.robust
        << " (weak " << check.weak << ", strict " << check.strict << ")\n";
  double min_margin = std::numeric_limits<double>::infinity();
  for (const KktCheck& check : report.inactive_margins)
    min_margin = std::min(min_margin, check.robust);
  out << "minimum subgradient margin over days: " << min_margin << '\n';
  if (report.constraints_active) out << "note: " << report.note << '\n';
  // The certificate targets the unconstrained program. When a shape row is
  // binding its multiplier is missing from the stationarity sum, so a failed
  // numeric check is advisory rather than a defect.
  std::string verdict;
  int code;
  if (report.pass) {
    verdict = report.constraints_active ? "PASS (advisory)" : "PASS";
    code = kExitOk;
  } else if (report.constraints_active) {
    verdict = "ADVISORY (not certified: shape constraints binding)";
    code = kExitOk;
  } else {
    verdict = "FAIL";
    code = kExitUsage;
  }
  out << "verdict: " << verdict << '\n';
  return code;
}

struct CurveOptions {
  std::string fit;
  int grid = 200;
  std::string times;
  std::string out;
};

int run_curve(const CurveOptions& opt, std::ostream& out_stream, std::ostream& err) {
  const FitArtifact fit = load_fit(opt.fit);
  const std::vector<int> days = parse_days(opt.times);
  if (opt.out.empty()) {
    emit_curve(fit, opt.grid, days, out_stream);
  } else {
    std::ostringstream buf;
    emit_curve(fit, opt.grid, days, buf);
    atomic_write_file(opt.out, buf.str());
    err << "wrote " << opt.out << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-varying option price curves with changepoint detection"};
  app.require_subcommand(1);

  EstimateOptions est;
  CLI::App* cmd_est = app.add_subcommand(
      "estimate", "Fit shape-constrained quantile price curves to an option chain");
  cmd_est->add_option("--input", est.input, "Option chain CSV (day,strike,price)")->required();
  cmd_est->add_option("--out", est.out, "Fit artifact path (default fit.json)");
  cmd_est->add_option("--tau", est.tau, "Quantile level in (0, 1)");
  cmd_est->add_option("--lambda", est.lambda, "Penalty: number, auto-detect or auto-estimate");
  cmd_est->add_option("--basis", est.basis, "Curve basis: spline or poly");
  cmd_est->add_option("--degree", est.degree, "Basis degree");
  cmd_est->add_option("--knots", est.knots, "Interior knot count or auto");
  cmd_est->add_option("--constraints", est.constraints,
                      "none or comma list of noninc,convex");
  cmd_est->add_option("--loss", est.loss, "Loss: quantile or squared");
  cmd_est->add_flag("--refit", est.refit, "Refit each detected segment without penalty");

  SimulateOptions sim;
  CLI::App* cmd_sim =
      app.add_subcommand("simulate", "Monte Carlo study of changepoint recovery");
  cmd_sim->add_option("--phases", sim.phases, "Truth layout: two or five");
  cmd_sim->add_option("--n", sim.n, "Strikes per day");
  cmd_sim->add_option("--T", sim.T, "Days");
  cmd_sim->add_option("--dist", sim.dist, "Error distribution: normal or cauchy");
  cmd_sim->add_option("--loss", sim.loss, "Loss: quantile or squared");
  cmd_sim->add_option("--reps", sim.reps, "Replications");
  cmd_sim->add_option("--seed", sim.seed, "Master seed");
  cmd_sim->add_option("--out", sim.out, "Write the JSON report here");

  AuditOptions aud;
  CLI::App* cmd_aud =
      app.add_subcommand("audit", "Check the optimality certificate of a stored fit");
  cmd_aud->add_option("--fit", aud.fit, "Fit artifact")->required();
  cmd_aud->add_option("--input", aud.input, "The chain the fit was estimated from")->required();
  cmd_aud->add_option("--tol", aud.tol, "Relative certificate tolerance");

  CurveOptions cur;
  CLI::App* cmd_cur = app.add_subcommand("curve", "Evaluate fitted curves on a strike grid");
  cmd_cur->add_option("--fit", cur.fit, "Fit artifact")->required();
  cmd_cur->add_option("--grid", cur.grid, "Grid points across the strike domain");
  cmd_cur->add_option("--times", cur.times, "Comma list of days (default all)");
  cmd_cur->add_option("--out", cur.out, "Curve CSV path (default standard output)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    const int code = app.exit(e, out, msg);
    err << msg.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cmd_est->parsed()) return run_estimate(est, err);
    if (cmd_sim->parsed()) return run_simulate(sim, out, err);
    if (cmd_aud->parsed()) return run_audit(aud, out, err);
    return run_curve(cur, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace qfl
