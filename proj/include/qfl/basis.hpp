#pragma once

#include <Eigen/Dense>
#include <vector>

namespace qfl {

enum class BasisKind { polynomial, truncated_power_spline };

// Functional basis on a strike interval [lo, hi].
//
// Monomials are formed on s = (x - scale_offset) / scale_width.  The default
// scale is the identity, so a polynomial basis evaluates plain powers of the
// strike; rescaled_to_unit() produces the well-conditioned variant used when
// fitting raw dollar strikes.  Coefficients always refer to the basis that
// carries the scale, so a fitted curve is reproducible from this struct alone.
struct BasisSpec {
  BasisKind kind = BasisKind::polynomial;
  int degree = 2;
  std::vector<double> knots;  // ascending, strictly inside (lo, hi); spline only
  double lo = 0.0;
  double hi = 1.0;
  double scale_offset = 0.0;
  double scale_width = 1.0;

  // Number of basis functions: degree + 1 monomials plus one truncated power
  // per knot.
  int size() const;
};

BasisSpec make_polynomial_basis(int degree, double lo, double hi);

BasisSpec make_truncated_spline_basis(int degree, std::vector<double> knots,
                                      double lo, double hi);

// Same basis with monomials formed on strikes mapped affinely onto [0, 1].
BasisSpec rescaled_to_unit(const BasisSpec& b);

// Interior knots as order statistics of the distinct strike values at
// equispaced quantile levels j/(count+1).  Knots that land on the extreme
// values or coincide are dropped, so the result may be shorter than count.
// Requires at least two distinct strikes.
std::vector<double> choose_knots(const std::vector<double>& strikes, int count);

// Default interior knot count for n distinct strikes: min(8, n/4).
int default_knot_count(int n_distinct);

// phi(x), phi'(x) or phi''(x) for order 0, 1, 2.  Derivatives are taken from
// the right, so a truncated power contributes at its own knot.  x must lie in
// [lo, hi].
Eigen::VectorXd eval_basis(const BasisSpec& b, double x, int order = 0);

// Rows phi(x_i)^T for each strike.
Eigen::MatrixXd build_design_rows(const BasisSpec& b,
                                  const std::vector<double>& strikes);

struct ShapeMatrices {
  Eigen::MatrixXd D;         // rows phi'(g)^T:  D beta <= 0 forbids increases
  Eigen::MatrixXd C;         // rows phi''(g)^T: C beta >= 0 forbids concavity
  std::vector<double> grid;  // evaluation points actually used
};

// Derivative rows on the given grid.  For degree-2 truncated splines the grid
// is augmented with every knot and both domain endpoints; phi' is then
// piecewise linear and phi'' piecewise constant with breaks only at knots,
// so sign constraints on the augmented grid hold on the whole interval.
ShapeMatrices build_shape_matrices(const BasisSpec& b, std::vector<double> grid);

}  // namespace qfl
