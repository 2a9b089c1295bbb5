#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qfl/panel.hpp"
#include "qfl/simulation.hpp"
#include "qfl/solver.hpp"

namespace qfl {

// Parses an option chain CSV with the exact header `day,strike,price`.
// Days are positive integers and are relabeled 1..T in ascending order;
// strikes become the sorted distinct column set; (day, strike) pairs that
// never occur are masked as unobserved.  Duplicate cells, malformed fields
// and non-finite prices raise DataError with the offending line number.
PanelDataset parse_option_chain(std::istream& in);
PanelDataset load_option_chain(const std::string& path);

// Everything needed to reproduce, evaluate and audit a fit.
struct FitArtifact {
  int schema = 1;
  BasisSpec basis;
  double tau = 0.5;
  double lambda = 0.0;
  LossKind loss = LossKind::quantile;
  ConstraintFlags constraints;
  std::vector<Eigen::VectorXd> betas;   // per day; refitted when refit_applied
  std::vector<Eigen::VectorXd> thetas;  // per day boundary; exact zeros kept
  std::vector<Eigen::VectorXd> penalized_betas;  // pre-refit path, present iff refit_applied
  std::vector<int> changepoints;        // 1-based days
  std::vector<std::pair<int, int>> segments;
  bool refit_applied = false;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  long input_rows = 0;  // fingerprint of the chain the fit was made from
  double input_strike_lo = 0.0;
  double input_strike_hi = 0.0;
  std::string input_hash;

  CoefficientPath path() const { return {betas, basis}; }
};

std::string fit_to_json(const FitArtifact& fit);
FitArtifact fit_from_json(const std::string& text);

// Atomic writes: content lands under a temporary name and is renamed over
// the target, so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& content);
void save_fit(const FitArtifact& fit, const std::string& path);
FitArtifact load_fit(const std::string& path);

// Curve CSV `time,strike,price` on an equispaced grid over the basis domain.
// grid_size >= 2; endpoints included.  days empty means all days.
void emit_curve(const FitArtifact& fit, int grid_size, const std::vector<int>& days,
                std::ostream& out);

std::string simulation_report_json(const SimulationReport& report);
std::string simulation_report_table(const SimulationReport& report);

std::uint64_t fnv1a64(const std::string& bytes);
std::string file_fingerprint_hash(const std::string& bytes);

// Synthetic 21-day, 36-strike call panel with one mid-period level shift.
// Purely artificial data for demos and end-to-end tests.
std::string synthetic_chain_csv(std::uint64_t seed = 20240901);

}  // namespace qfl
