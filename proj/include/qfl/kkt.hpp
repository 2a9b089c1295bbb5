#pragma once

#include <string>
#include <vector>

#include "qfl/panel.hpp"
#include "qfl/solver.hpp"

namespace qfl {

// Optimality certificate for the quantile objective, built from the
// subgradient of the pooled check loss with respect to each day's jump.
// Residuals at kinks depend on how ties Y = fit are counted; `weak` counts
// them as Y <= fit, `strict` as Y < fit, and `robust` measures the distance
// to the full subgradient set in which each tied cell's indicator flips
// independently, which is the sound test when fitted values sit exactly on
// observations.
struct KktCheck {
  int day = 0;
  double weak = 0.0;
  double strict = 0.0;
  double robust = 0.0;
};

struct KktReport {
  std::vector<KktCheck> active_residuals;  // one per detected changepoint
  std::vector<KktCheck> inactive_margins;  // one per day 1..T
  double tolerance = 1e-3;
  bool pass = false;
  bool constraints_active = false;  // a shape row is binding: certificate advisory
  bool applicable = true;           // false for squared-loss fits
  std::string note;
};

// Stationarity residual at an active changepoint day (robust convention).
// Requires quantile loss and a nonzero jump at `day`.
double kkt_active(const QflSolution& sol, const QflProblem& problem, int day,
                  double tie_tol = -1.0);

// Subgradient margin at any day in 1..T (robust convention); nonnegative
// margins certify that zero jumps are optimal.
double kkt_inactive(const QflSolution& sol, const QflProblem& problem, int day,
                    double tie_tol = -1.0);

// Full certificate: residuals for every active day, margins for every day.
// pass requires residuals <= tol * max(1, n lambda) and margins >=
// -tol * max(1, n lambda).  With binding shape constraints the certificate
// ignores their multipliers, so constraints_active downgrades it to advisory.
KktReport audit(const QflSolution& sol, const QflProblem& problem, double tol = 1e-3);

}  // namespace qfl
