#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "qfl/basis.hpp"
#include "qfl/errors.hpp"
#include "qfl/rng.hpp"

using namespace qfl;

TEST_CASE("polynomial basis evaluates plain monomials") {
  BasisSpec quad = make_polynomial_basis(2, 0.0, 1.0);
  CHECK(quad.size() == 3);
  Eigen::VectorXd v = eval_basis(quad, 0.5);
  CHECK(v(0) == doctest::Approx(1.0));
  CHECK(v(1) == doctest::Approx(0.5));
  CHECK(v(2) == doctest::Approx(0.25));

  BasisSpec constant = make_polynomial_basis(0, 0.0, 1.0);
  CHECK(constant.size() == 1);
  CHECK(eval_basis(constant, 0.3)(0) == doctest::Approx(1.0));

  BasisSpec cubic = make_polynomial_basis(3, 80.0, 120.0);
  CHECK(cubic.size() == 4);
  CHECK(eval_basis(cubic, 100.0)(3) == doctest::Approx(1'000'000.0));
}

TEST_CASE("polynomial basis rejects an empty interval") {
  CHECK_THROWS_AS(make_polynomial_basis(2, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_polynomial_basis(2, 2.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_polynomial_basis(-1, 0.0, 1.0), ConfigError);
}

TEST_CASE("truncated spline adds one power per knot") {
  BasisSpec b = make_truncated_spline_basis(2, {0.5}, 0.0, 1.0);
  CHECK(b.size() == 4);
  CHECK(eval_basis(b, 0.75)(3) == doctest::Approx(0.0625));
  CHECK(eval_basis(b, 0.25)(3) == doctest::Approx(0.0));
}

TEST_CASE("truncated spline validates knots") {
  CHECK_THROWS_AS(make_truncated_spline_basis(2, {0.5, 0.5}, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_truncated_spline_basis(2, {0.7, 0.5}, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_truncated_spline_basis(2, {0.0}, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_truncated_spline_basis(2, {1.0}, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_truncated_spline_basis(0, {}, 0.0, 1.0), ConfigError);
}

TEST_CASE("spline with no knots matches the polynomial basis everywhere") {
  BasisSpec spline = make_truncated_spline_basis(2, {}, 0.0, 1.0);
  BasisSpec poly = make_polynomial_basis(2, 0.0, 1.0);
  for (double x : {0.0, 0.11, 0.5, 0.93, 1.0}) {
    for (int order = 0; order <= 2; ++order) {
      Eigen::VectorXd a = eval_basis(spline, x, order);
      Eigen::VectorXd b = eval_basis(poly, x, order);
      REQUIRE(a.size() == b.size());
      CHECK((a - b).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("choose_knots picks interior order statistics") {
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(i);

  CHECK(choose_knots(grid, 1) == std::vector<double>{5.0});
  CHECK(choose_knots(grid, 3) == std::vector<double>{3.0, 5.0, 7.0});
  CHECK(choose_knots(grid, 0).empty());
}

TEST_CASE("choose_knots collapses duplicates instead of failing") {
  std::vector<double> ties{1.0, 1.0, 1.0, 2.0};
  std::vector<double> knots = choose_knots(ties, 2);
  CHECK(knots.size() <= 1);
  std::vector<double> distinct;
  // whatever survives must be strictly inside the strike range
  for (double k : knots) {
    CHECK(k > 1.0);
    CHECK(k < 2.0);
  }
  CHECK_THROWS_AS(choose_knots({3.0, 3.0, 3.0}, 1), ConfigError);
}

TEST_CASE("default knot count caps at eight") {
  CHECK(default_knot_count(12) == 3);
  CHECK(default_knot_count(36) == 8);
  CHECK(default_knot_count(400) == 8);
}

TEST_CASE("derivative orders of the quadratic monomial basis") {
  BasisSpec b = make_polynomial_basis(2, 0.0, 4.0);
  Eigen::VectorXd d1 = eval_basis(b, 2.0, 1);
  CHECK(d1(0) == doctest::Approx(0.0));
  CHECK(d1(1) == doctest::Approx(1.0));
  CHECK(d1(2) == doctest::Approx(4.0));
  Eigen::VectorXd d2 = eval_basis(b, 3.1, 2);
  CHECK(d2(0) == doctest::Approx(0.0));
  CHECK(d2(1) == doctest::Approx(0.0));
  CHECK(d2(2) == doctest::Approx(2.0));
}

TEST_CASE("second derivative of a truncated quadratic turns on at the knot") {
  BasisSpec b = make_truncated_spline_basis(2, {0.5}, 0.0, 1.0);
  Eigen::VectorXd d2 = eval_basis(b, 0.75, 2);
  CHECK(d2(0) == doctest::Approx(0.0));
  CHECK(d2(1) == doctest::Approx(0.0));
  CHECK(d2(2) == doctest::Approx(2.0));
  CHECK(d2(3) == doctest::Approx(2.0));
  // right limit: the knot itself already contributes
  CHECK(eval_basis(b, 0.5, 2)(3) == doctest::Approx(2.0));
  CHECK(eval_basis(b, 0.4999, 2)(3) == doctest::Approx(0.0));
}

TEST_CASE("evaluation outside the domain is a domain error") {
  BasisSpec b = make_polynomial_basis(2, 0.0, 1.0);
  CHECK_THROWS_AS(eval_basis(b, -0.001), DomainError);
  CHECK_THROWS_AS(eval_basis(b, 1.001), DomainError);
  CHECK_THROWS_AS(eval_basis(b, 0.5, 3), ConfigError);
  CHECK_NOTHROW(eval_basis(b, 0.0));
  CHECK_NOTHROW(eval_basis(b, 1.0));
}

TEST_CASE("finite differences confirm both derivative orders") {
  std::vector<BasisSpec> bases{
      make_polynomial_basis(3, 0.0, 2.0),
      make_truncated_spline_basis(2, {0.6, 1.2}, 0.0, 2.0),
      rescaled_to_unit(make_truncated_spline_basis(2, {95.0, 105.0}, 80.0, 120.0)),
  };
  Rng rng(31);
  for (const BasisSpec& b : bases) {
    const double span = b.hi - b.lo;
    const double h = span * 1e-6;
    int tested = 0;
    while (tested < 200) {
      const double x = b.lo + span * (0.01 + 0.98 * rng.uniform());
      bool near_knot = false;
      for (double k : b.knots)
        if (std::abs(x - k) < 1e-3 * span) near_knot = true;
      if (near_knot) continue;
      ++tested;
      Eigen::VectorXd f0 = eval_basis(b, x - h);
      Eigen::VectorXd f2 = eval_basis(b, x + h);
      Eigen::VectorXd g0 = eval_basis(b, x - h, 1);
      Eigen::VectorXd g2 = eval_basis(b, x + h, 1);
      Eigen::VectorXd d1 = eval_basis(b, x, 1);
      Eigen::VectorXd d2 = eval_basis(b, x, 2);
      for (int j = 0; j < b.size(); ++j) {
        const double fd1 = (f2(j) - f0(j)) / (2 * h);
        const double fd2 = (g2(j) - g0(j)) / (2 * h);
        CHECK(fd1 == doctest::Approx(d1(j)).epsilon(1e-5));
        CHECK(fd2 == doctest::Approx(d2(j)).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("design rows reproduce eval_basis per strike") {
  BasisSpec affine = make_polynomial_basis(1, 0.0, 1.0);
  Eigen::MatrixXd X = build_design_rows(affine, {0.0, 1.0});
  CHECK(X(0, 0) == doctest::Approx(1.0));
  CHECK(X(0, 1) == doctest::Approx(0.0));
  CHECK(X(1, 0) == doctest::Approx(1.0));
  CHECK(X(1, 1) == doctest::Approx(1.0));

  BasisSpec quad = make_polynomial_basis(2, 0.0, 4.0);
  Eigen::MatrixXd row = build_design_rows(quad, {2.0});
  CHECK(row(0, 0) == doctest::Approx(1.0));
  CHECK(row(0, 1) == doctest::Approx(2.0));
  CHECK(row(0, 2) == doctest::Approx(4.0));

  BasisSpec b = make_truncated_spline_basis(2, {0.5}, 0.0, 1.0);
  Rng rng(5);
  std::vector<double> strikes;
  for (int i = 0; i < 5; ++i) strikes.push_back(rng.uniform());
  Eigen::MatrixXd rows = build_design_rows(b, strikes);
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd expect = eval_basis(b, strikes[i]);
    CHECK((rows.row(i).transpose() - expect).lpNorm<Eigen::Infinity>() ==
          doctest::Approx(0.0));
  }
}

TEST_CASE("shape matrices hold derivative rows") {
  BasisSpec b = make_polynomial_basis(2, -1.0, 1.0);
  ShapeMatrices sm = build_shape_matrices(b, {0.0, 1.0});
  REQUIRE(sm.D.rows() == 2);
  CHECK(sm.D(0, 0) == doctest::Approx(0.0));
  CHECK(sm.D(0, 1) == doctest::Approx(1.0));
  CHECK(sm.D(0, 2) == doctest::Approx(0.0));
  CHECK(sm.D(1, 1) == doctest::Approx(1.0));
  CHECK(sm.D(1, 2) == doctest::Approx(2.0));
  CHECK(sm.C(0, 2) == doctest::Approx(2.0));
  CHECK(sm.C(1, 2) == doctest::Approx(2.0));

  // affine decreasing curve: feasible for both constraint senses
  Eigen::Vector3d affine(5.0, -1.0, 0.0);
  CHECK(((sm.D * affine).array() <= 0.0).all());
  CHECK(((sm.C * affine).array() >= 0.0).all());

  // x^2 on a sign-changing domain: D encodes non-increase, not unimodality
  ShapeMatrices wide = build_shape_matrices(b, {-1.0, 1.0});
  Eigen::Vector3d square(0.0, 0.0, 1.0);
  Eigen::VectorXd slopes = wide.D * square;
  CHECK(slopes(0) == doctest::Approx(-2.0));
  CHECK(slopes(1) == doctest::Approx(2.0));
  CHECK_FALSE((slopes.array() <= 0.0).all());

  CHECK_THROWS_AS(build_shape_matrices(b, {}), ConfigError);
}

TEST_CASE("degree-2 spline grid constraints imply global shape") {
  BasisSpec b = make_truncated_spline_basis(2, {0.3, 0.7}, 0.0, 1.0);
  std::vector<double> grid{0.1, 0.45, 0.9};
  ShapeMatrices sm = build_shape_matrices(b, grid);

  // knots and endpoints must be present after augmentation
  for (double required : {0.0, 0.3, 0.7, 1.0}) {
    CHECK(std::count(sm.grid.begin(), sm.grid.end(), required) == 1);
  }

  Rng rng(91);
  int feasible_seen = 0;
  while (feasible_seen < 20) {
    Eigen::VectorXd beta(b.size());
    for (int j = 0; j < beta.size(); ++j) beta(j) = 2.0 * rng.normal();
    const bool noninc = ((sm.D * beta).array() <= 0.0).all();
    const bool convex = ((sm.C * beta).array() >= 0.0).all();
    if (!noninc && !convex) continue;
    ++feasible_seen;
    std::vector<double> probe;
    for (int g = 0; g <= 400; ++g) probe.push_back(g / 400.0);
    double prev = eval_basis(b, probe[0]).dot(beta);
    std::vector<double> values{prev};
    for (std::size_t g = 1; g < probe.size(); ++g) {
      values.push_back(eval_basis(b, probe[g]).dot(beta));
    }
    if (noninc) {
      for (std::size_t g = 1; g < values.size(); ++g)
        CHECK(values[g] <= values[g - 1] + 1e-10);
    }
    if (convex) {
      for (std::size_t g = 2; g < values.size(); ++g)
        CHECK(values[g] - 2 * values[g - 1] + values[g - 2] >= -1e-10);
    }
  }
}

TEST_CASE("unit rescaling keeps the fitted curve while taming magnitudes") {
  BasisSpec raw = make_truncated_spline_basis(2, {95.0}, 80.0, 120.0);
  BasisSpec unit = rescaled_to_unit(raw);
  CHECK(unit.scale_offset == doctest::Approx(80.0));
  CHECK(unit.scale_width == doctest::Approx(40.0));
  CHECK(unit.lo == doctest::Approx(raw.lo));
  CHECK(unit.hi == doctest::Approx(raw.hi));
  CHECK(unit.size() == raw.size());
  // monomial values stay in [0,1] instead of blowing up to 1e4
  Eigen::VectorXd v = eval_basis(unit, 120.0);
  CHECK(v.lpNorm<Eigen::Infinity>() <= 1.0 + 1e-12);
  // knots keep their strike-space location
  CHECK(unit.knots == std::vector<double>{95.0});
  CHECK(eval_basis(unit, 94.0)(3) == doctest::Approx(0.0));
  CHECK(eval_basis(unit, 97.0)(3) > 0.0);
}
