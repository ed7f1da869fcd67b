#include <doctest.h>

#include <cmath>

#include "dense_reference.hpp"
#include "mgcnn/discretization.hpp"
#include "mgcnn/rng.hpp"

using namespace mgcnn;
using mgcnn::testing::dense_operator_matrix;
using mgcnn::testing::flatten;
using mgcnn::testing::unflatten;

namespace {

ProblemSpec<double> random_spec(int n, double angle, double re_limit, Rng& rng) {
  ProblemSpec<double> spec;
  spec.grid_n = n;
  spec.velocity_x = std::sin(angle);
  spec.velocity_y = std::cos(angle);
  spec.re_limit = re_limit;
  Tensor<double> r(1, n, n);
  fill_uniform01(r, rng);
  spec.coef = coef_from_random(r, re_limit);
  return spec;
}

}  // namespace

TEST_CASE("upwind stencil for axis velocities") {
  // v = (1, 0): pure backward difference in x.
  UpwindStencil s = build_upwind_stencil(1.0, 0.0);
  const std::array<double, 9> want_x = {0, 0, 0, -1, 1, 0, 0, 0, 0};
  for (int i = 0; i < 9; ++i) CHECK(s.upwind[i] == doctest::Approx(want_x[i]));
  const std::array<double, 9> lap = {0, -1, 0, -1, 4, -1, 0, -1, 0};
  for (int i = 0; i < 9; ++i) CHECK(s.laplacian[i] == doctest::Approx(lap[i]));

  // v = (0, -1): -dy+.
  s = build_upwind_stencil(0.0, -1.0);
  const std::array<double, 9> want_y = {0, -1, 0, 0, 1, 0, 0, 0, 0};
  for (int i = 0; i < 9; ++i) CHECK(s.upwind[i] == doctest::Approx(want_y[i]));
}

TEST_CASE("upwind stencil for the paper velocity angle") {
  const double vx = std::sin(0.5), vy = std::cos(0.5);
  UpwindStencil s = build_upwind_stencil(vx, vy);
  // Both components positive: sin(0.5) dx- + cos(0.5) dy-.
  std::array<double, 9> want = {0, 0, 0, -vx, vx + vy, 0, 0, -vy, 0};
  for (int i = 0; i < 9; ++i) CHECK(s.upwind[i] == doctest::Approx(want[i]));

  CHECK_THROWS_AS(build_upwind_stencil(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("apply_operator matches the dense assembly on random problems") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = (trial % 2 == 0) ? 7 : 3;
    const double angle = rng.uniform01() * 6.28318;
    ProblemSpec<double> spec = random_spec(n, angle, 1000.0, rng);
    Tensor<double> sol(1, n, n);
    fill_normal(sol, rng);

    Tensor<double> got = apply_operator(spec, sol);
    Eigen::VectorXd want = dense_operator_matrix(spec) * flatten(sol);
    const double err = norm2(sub(got, unflatten(want, 1, n, n)));
    CHECK(err < 1e-12 * std::max(1.0, norm2(got)));
  }
}

TEST_CASE("apply_operator on constants with v=(1,0)") {
  ProblemSpec<double> spec;
  spec.grid_n = 5;
  spec.velocity_x = 1.0;
  spec.velocity_y = 0.0;
  spec.re_limit = 1000.0;
  spec.coef = Tensor<double>::constant(1, 5, 5, 1.0);
  Tensor<double> ones = Tensor<double>::constant(1, 5, 5, 1.0);
  Tensor<double> y = apply_operator(spec, ones);
  // Interior: zero Laplacian, zero upwind difference.
  CHECK(y.at(0, 2, 2) == doctest::Approx(0.0));
  // Left column: the upwind backward difference hits the boundary zero and
  // the Laplacian misses one neighbor.
  CHECK(y.at(0, 2, 0) == doctest::Approx(2.0));

  Tensor<double> zeros(1, 5, 5);
  CHECK(norm2(apply_operator(spec, zeros)) == 0.0);
}

TEST_CASE("operator diagonal is 4 coef + |vx| + |vy|") {
  Rng rng(22);
  ProblemSpec<double> spec = random_spec(7, 2.2, 1000.0, rng);
  Eigen::MatrixXd a = dense_operator_matrix(spec);
  Tensor<double> d = jacobi_diagonal(spec);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      CHECK(a(i * 7 + j, i * 7 + j) == doctest::Approx(d.at(0, i, j)).epsilon(1e-13));
    }
  }
}

TEST_CASE("residual of the exact dense solution vanishes") {
  Rng rng(23);
  ProblemSpec<double> spec = random_spec(7, 0.5, 1000.0, rng);
  Tensor<double> rhs(1, 7, 7);
  fill_normal(rhs, rng);

  Eigen::VectorXd sol = dense_operator_matrix(spec).partialPivLu().solve(flatten(rhs));
  Tensor<double> r = residual(spec, unflatten(sol, 1, 7, 7), rhs);
  CHECK(norm2(r) < 1e-10);

  Tensor<double> zeros(1, 7, 7);
  CHECK(norm2(sub(residual(spec, zeros, rhs), rhs)) == 0.0);
}

TEST_CASE("apply_operator is linear in sol") {
  Rng rng(24);
  ProblemSpec<double> spec = random_spec(7, 1.1, 100.0, rng);
  Tensor<double> a(1, 7, 7), b(1, 7, 7);
  fill_normal(a, rng);
  fill_normal(b, rng);
  Tensor<double> lhs = apply_operator(spec, axpy(a, scale(b, -2.5), 0.7));
  Tensor<double> rhs =
      axpy(apply_operator(spec, a), scale(apply_operator(spec, b), -2.5), 0.7);
  CHECK(norm2(sub(lhs, rhs)) < 1e-12 * std::max(1.0, norm2(rhs)));
}

TEST_CASE("coef_from_random endpoints, interior value and monotonicity") {
  Tensor<double> r(1, 1, 3, {0.0, 0.5, 1.0});
  Tensor<double> c = coef_from_random(r, 1000.0);
  CHECK(c.at(0, 0, 0) == doctest::Approx(1.0));
  CHECK(c.at(0, 0, 1) == doctest::Approx(std::pow(10.0, -1.5)));
  CHECK(c.at(0, 0, 2) == doctest::Approx(0.001));
  CHECK(c.at(0, 0, 0) > c.at(0, 0, 1));
  CHECK(c.at(0, 0, 1) > c.at(0, 0, 2));

  Rng rng(25);
  Tensor<double> big(1, 16, 16);
  fill_uniform01(big, rng);
  Tensor<double> mapped = coef_from_random(big, 50.0);
  for (double v : mapped.flat()) {
    CHECK(v <= 1.0);
    CHECK(v >= 1.0 / 50.0);
  }

  Tensor<double> bad(1, 1, 1, {1.5});
  CHECK_THROWS_AS(coef_from_random(bad, 1000.0), std::invalid_argument);
}

TEST_CASE("ProblemSpec validation") {
  ProblemSpec<double> spec;
  spec.grid_n = 6;  // not 2^k-1
  spec.velocity_x = 1.0;
  spec.coef = Tensor<double>::constant(1, 6, 6, 1.0);
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.grid_n = 7;
  spec.coef = Tensor<double>::constant(1, 7, 7, 1.0);
  CHECK_NOTHROW(spec.validate());
  spec.velocity_x = 0.5;  // not unit norm
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
