#include "qfl/basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qfl/errors.hpp"

namespace qfl {

namespace {

void check_interval(double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("basis domain requires lo < hi");
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("basis domain must be finite");
}

// Integer power with 0^0 = 1, matching the convention for the constant term.
double ipow(double x, int k) {
  double r = 1.0;
  for (int j = 0; j < k; ++j) r *= x;
  return r;
}

}  // namespace

int BasisSpec::size() const {
  int p = degree + 1;
  if (kind == BasisKind::truncated_power_spline) p += static_cast<int>(knots.size());
  return p;
}

BasisSpec make_polynomial_basis(int degree, double lo, double hi) {
  if (degree < 0) throw ConfigError("polynomial degree must be >= 0");
  check_interval(lo, hi);
  BasisSpec b;
  b.kind = BasisKind::polynomial;
  b.degree = degree;
  b.lo = lo;
  b.hi = hi;
  return b;
}

BasisSpec make_truncated_spline_basis(int degree, std::vector<double> knots,
                                      double lo, double hi) {
  if (degree < 1) throw ConfigError("spline degree must be >= 1");
  check_interval(lo, hi);
  for (std::size_t j = 0; j < knots.size(); ++j) {
    if (!(knots[j] > lo && knots[j] < hi))
      throw ConfigError("knots must lie strictly inside the domain");
    if (j > 0 && !(knots[j] > knots[j - 1]))
      throw ConfigError("knots must be strictly ascending");
  }
  BasisSpec b;
  b.kind = BasisKind::truncated_power_spline;
  b.degree = degree;
  b.knots = std::move(knots);
  b.lo = lo;
  b.hi = hi;
  return b;
}

BasisSpec rescaled_to_unit(const BasisSpec& b) {
  BasisSpec r = b;
  r.scale_offset = b.lo;
  r.scale_width = b.hi - b.lo;
  return r;
}

std::vector<double> choose_knots(const std::vector<double>& strikes, int count) {
  if (count < 0) throw ConfigError("knot count must be >= 0");
  std::vector<double> u(strikes.begin(), strikes.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  const auto m = static_cast<long>(u.size());
  if (m < 2) throw ConfigError("choose_knots requires at least two distinct strikes");
  std::vector<double> knots;
  for (int j = 1; j <= count; ++j) {
    const double h = static_cast<double>(m - 1) * j / (count + 1.0);
    const long idx = std::llround(h);
    if (idx <= 0 || idx >= m - 1) continue;  // extreme values cannot be knots
    knots.push_back(u[static_cast<std::size_t>(idx)]);
  }
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  return knots;
}

int default_knot_count(int n_distinct) {
  return std::min(8, n_distinct / 4);
}

Eigen::VectorXd eval_basis(const BasisSpec& b, double x, int order) {
  if (order < 0 || order > 2) throw ConfigError("derivative order must be 0, 1 or 2");
  if (!(x >= b.lo && x <= b.hi)) throw DomainError("strike outside the basis domain");
  const double w = b.scale_width;
  const double s = (x - b.scale_offset) / w;
  Eigen::VectorXd phi(b.size());
  for (int l = 0; l <= b.degree; ++l) {
    switch (order) {
      case 0: phi[l] = ipow(s, l); break;
      case 1: phi[l] = l >= 1 ? l * ipow(s, l - 1) / w : 0.0; break;
      default: phi[l] = l >= 2 ? l * (l - 1) * ipow(s, l - 2) / (w * w) : 0.0; break;
    }
  }
  if (b.kind == BasisKind::truncated_power_spline) {
    const int d = b.degree;
    for (std::size_t j = 0; j < b.knots.size(); ++j) {
      // Forming the difference before rescaling keeps t exactly zero at the
      // knot, where the right limit applies.
      const double t = (x - b.knots[j]) / w;
      double v = 0.0;
      if (t >= 0.0) {
        switch (order) {
          case 0: v = ipow(t, d); break;
          case 1: v = d * ipow(t, d - 1) / w; break;
          default: v = d >= 2 ? d * (d - 1) * ipow(t, d - 2) / (w * w) : 0.0; break;
        }
      }
      phi[b.degree + 1 + static_cast<int>(j)] = v;
    }
  }
  return phi;
}

Eigen::MatrixXd build_design_rows(const BasisSpec& b, const std::vector<double>& strikes) {
  Eigen::MatrixXd X(strikes.size(), b.size());
  for (std::size_t i = 0; i < strikes.size(); ++i)
    X.row(i) = eval_basis(b, strikes[i], 0).transpose();
  return X;
}

ShapeMatrices build_shape_matrices(const BasisSpec& b, std::vector<double> grid) {
  if (grid.empty()) throw ConfigError("shape constraint grid must not be empty");
  if (b.kind == BasisKind::truncated_power_spline && b.degree == 2) {
    grid.insert(grid.end(), b.knots.begin(), b.knots.end());
    grid.push_back(b.lo);
    grid.push_back(b.hi);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  ShapeMatrices out;
  out.D.resize(grid.size(), b.size());
  out.C.resize(grid.size(), b.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out.D.row(g) = eval_basis(b, grid[g], 1).transpose();
    out.C.row(g) = eval_basis(b, grid[g], 2).transpose();
  }
  out.grid = std::move(grid);
  return out;
}

}  // namespace qfl
