#pragma once

#include <utility>
#include <vector>

#include "qfl/panel.hpp"
#include "qfl/solver.hpp"

namespace qfl {

// Day indices here are 1-based: changepoint t means day t broke away from
// day t-1, so valid changepoints lie in {2, ..., T}.
struct Segmentation {
  std::vector<int> changepoints;                 // ascending
  std::vector<std::pair<int, int>> segments;     // inclusive [first, last] days

  int T() const { return segments.empty() ? 0 : segments.back().second; }
};

// Days whose jump estimate is a nonzero vector.  The solver's block soft
// threshold produces exact zeros, so this is an exact comparison, not a
// tolerance test.
Segmentation extract_changepoints(const QflSolution& sol);

Segmentation segmentation_from_changepoints(const std::vector<int>& changepoints, int T);

enum class LambdaRule {
  detect,    // (log n)^(5/2) / n: conservative, for changepoint screening
  estimate,  // (log n)^(1/2) / n: lighter, for coefficient estimation
};

// Requires n >= 2.
double lambda_default(long n, LambdaRule rule);

struct RefitResult {
  CoefficientPath path;
  std::vector<bool> refit_ok;  // per segment; false keeps the input coefficients
};

// Unpenalized pooled fit per segment, under the problem's loss and shape
// constraints.  A segment with fewer observed cells than coefficients is
// left at the input path and flagged.
RefitResult refit_segments(const QflProblem& problem, const CoefficientPath& path,
                           const Segmentation& seg, const SolverConfig& config = {});

struct RecoveryMetrics {
  double discovered = 0.0;    // fraction of true changepoints matched
  double count_ratio = 0.0;   // |estimated| / |true|
  bool truth_empty = false;   // metrics degenerate; count_ratio holds |estimated|
};

// A true changepoint counts as discovered when an estimated one lies within
// `window` days of it (window 0 demands exact hits).
RecoveryMetrics recovery_metrics(const std::vector<int>& estimated,
                                 const std::vector<int>& truth, int window = 0);

// Optional post-processing: inside every run of changepoints closer than
// min_spacing, keep only the day with the largest jump norm.  thetas must be
// the solver's jump estimates (entry k belongs to day k + 2).
std::vector<int> merge_close_changepoints(const std::vector<int>& changepoints,
                                          const std::vector<Eigen::VectorXd>& thetas,
                                          int min_spacing);

}  // namespace qfl
