#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

// Reference minimizers and objective evaluators that are deliberately
// independent of the library's solver: plain loops, exhaustive enumeration
// and interval shrinking only.  Slow but trustworthy.
namespace qfl::test {

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Dense scan of a convex scalar function; returns the best grid value and
// writes the argmin if requested.
double grid_min_1d(const std::function<double(double)>& f, double lo, double hi,
                   double step, double* argmin = nullptr);

// Convexity-safe ternary search (ties shrink both ends); returns the argmin.
double ternary_min_1d(const std::function<double(double)>& f, double lo, double hi,
                      int iters = 140);

// Global minimum of a convex function of 1..3 variables by nested ternary
// search over a box.  Returns the argmin.
Eigen::VectorXd nested_ternary_min(const Objective& f, const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi, int iters = 140);

// Exact check-loss regression by enumerating interpolating subsets: some
// optimum fits p observations exactly when the design is in general
// position, so scanning all p-subsets finds a global minimum.
struct EnumFit {
  Eigen::VectorXd beta;
  double objective = 0.0;
};
EnumFit quantile_enum_oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             double tau);

// Panel objective evaluated with plain loops, for cross-checking the
// library's accounting.
struct OracleCell {
  int t;
  int i;
  double y;
};
double panel_objective_oracle(const Eigen::MatrixXd& X, const std::vector<OracleCell>& cells,
                              double tau, double nlambda, bool squared,
                              const std::vector<Eigen::VectorXd>& betas);

// Global minimization of a convex function over R^d (d small): shrinking
// grid sweeps around the incumbent followed by random-direction line
// searches.  Deterministic for a fixed seed.
struct BoxMinResult {
  Eigen::VectorXd x;
  double value = 0.0;
};
BoxMinResult box_refine_min(const Objective& f, Eigen::VectorXd center, double half_width,
                            int rounds, int pts_per_dim, std::uint64_t polish_seed,
                            int polish_directions);

}  // namespace qfl::test
