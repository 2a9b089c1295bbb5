#include "qfl/changepoint.hpp"

#include <cmath>

#include "qfl/errors.hpp"

namespace qfl {

Segmentation extract_changepoints(const QflSolution& sol) {
  std::vector<int> cps;
  for (std::size_t k = 0; k < sol.thetas.size(); ++k)
    if (!sol.thetas[k].isZero(0.0)) cps.push_back(static_cast<int>(k) + 2);
  return segmentation_from_changepoints(cps, sol.path.T());
}

Segmentation segmentation_from_changepoints(const std::vector<int>& changepoints, int T) {
  if (T < 1) throw ConfigError("segmentation requires T >= 1");
  Segmentation seg;
  seg.changepoints = changepoints;
  int start = 1;
  for (int cp : changepoints) {
    if (cp < 2 || cp > T || cp <= start)
      throw ConfigError("changepoints must be ascending and lie in [2, T]");
    seg.segments.emplace_back(start, cp - 1);
    start = cp;
  }
  seg.segments.emplace_back(start, T);
  return seg;
}

double lambda_default(long n, LambdaRule rule) {
  if (n < 2) throw ConfigError("lambda_default requires n >= 2");
  const double logn = std::log(static_cast<double>(n));
  const double power = rule == LambdaRule::detect ? 2.5 : 0.5;
  return std::pow(logn, power) / static_cast<double>(n);
}

RefitResult refit_segments(const QflProblem& problem, const CoefficientPath& path,
                           const Segmentation& seg, const SolverConfig& config) {
  if (path.T() != problem.T || seg.T() != problem.T)
    throw UsageError("segmentation does not match the problem");
  RefitResult out;
  out.path = path;
  for (const auto& [first, last] : seg.segments) {
    QflProblem pooled = problem;
    pooled.T = 1;
    pooled.lambda = 0.0;
    pooled.cells.clear();
    for (const LossCell& cell : problem.cells)
      if (cell.t >= first - 1 && cell.t <= last - 1)
        pooled.cells.push_back({0, cell.i, cell.y});
    if (static_cast<int>(pooled.cells.size()) < problem.p()) {
      out.refit_ok.push_back(false);
      continue;
    }
    QflSolution fit = solve(pooled, config);
    for (int t = first - 1; t <= last - 1; ++t) out.path.betas[t] = fit.path.betas[0];
    out.refit_ok.push_back(true);
  }
  return out;
}

RecoveryMetrics recovery_metrics(const std::vector<int>& estimated,
                                 const std::vector<int>& truth, int window) {
  if (window < 0) throw ConfigError("matching window must be >= 0");
  RecoveryMetrics m;
  if (truth.empty()) {
    m.truth_empty = true;
    m.discovered = estimated.empty() ? 1.0 : 0.0;
    m.count_ratio = static_cast<double>(estimated.size());
    return m;
  }
  int hit = 0;
  for (int t : truth)
    for (int e : estimated)
      if (std::abs(e - t) <= window) {
        ++hit;
        break;
      }
  m.discovered = static_cast<double>(hit) / static_cast<double>(truth.size());
  m.count_ratio = static_cast<double>(estimated.size()) / static_cast<double>(truth.size());
  return m;
}

std::vector<int> merge_close_changepoints(const std::vector<int>& changepoints,
                                          const std::vector<Eigen::VectorXd>& thetas,
                                          int min_spacing) {
  if (min_spacing <= 1 || changepoints.empty()) return changepoints;
  auto jump_norm = [&](int day) {
    const std::size_t k = static_cast<std::size_t>(day) - 2;
    if (k >= thetas.size()) throw UsageError("changepoint day has no jump estimate");
    return thetas[k].norm();
  };
  std::vector<int> merged;
  std::size_t i = 0;
  while (i < changepoints.size()) {
    std::size_t j = i;
    int best = changepoints[i];
    while (j + 1 < changepoints.size() &&
           changepoints[j + 1] - changepoints[j] < min_spacing) {
      ++j;
      if (jump_norm(changepoints[j]) > jump_norm(best)) best = changepoints[j];
    }
    merged.push_back(best);
    i = j + 1;
  }
  return merged;
}

}  // namespace qfl
