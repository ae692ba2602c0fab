#include "doctest.h"

#include "htlab/error.hpp"
#include "htlab/lp.hpp"

#include <random>

using namespace htlab;
using namespace htlab::lp;

namespace {

Vector v(std::initializer_list<double> xs) {
  Vector out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) out[k++] = x;
  return out;
}

// minimize rho s.t. x = 1, x - rho <= 0 over (x, rho) >= 0
LinearProgram n1_allocation_lp() {
  auto lp = make_lp(v({0.0, 1.0}));
  add_eq(lp, v({1.0, 0.0}), 1.0);
  add_ub(lp, v({1.0, -1.0}), 0.0);
  return lp;
}

bool feasible(const LinearProgram& lp, const Vector& x, double tol = 1e-9) {
  if (lp.nonneg && (x.array() < -tol).any()) return false;
  if (lp.eq_lhs.rows() && ((lp.eq_lhs * x - lp.eq_rhs).cwiseAbs().array() > tol).any()) return false;
  if (lp.ub_lhs.rows() && ((lp.ub_lhs * x - lp.ub_rhs).array() > tol).any()) return false;
  return true;
}

}  // namespace

TEST_CASE("allocation LP of the single-buffer network") {
  const auto sol = solve_lp(n1_allocation_lp());
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.point[0] == doctest::Approx(1.0));
  CHECK(sol.point[1] == doctest::Approx(1.0));
  CHECK(sol.is_unique);
}

TEST_CASE("empty feasible set is reported infeasible") {
  auto lp = make_lp(v({0.0}));
  add_eq(lp, v({1.0}), -1.0);
  CHECK(solve_lp(lp).status == LpStatus::Infeasible);
  CHECK(enumerate_vertices(lp).empty());
}

TEST_CASE("simplex with one equality") {
  auto lp = make_lp(v({1.0, 2.0}));
  add_eq(lp, v({1.0, 1.0}), 3.0);
  const auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.value == doctest::Approx(3.0));
  CHECK(sol.point[0] == doctest::Approx(3.0));
  CHECK(sol.point[1] == doctest::Approx(0.0));
  CHECK(sol.is_unique);

  const auto verts = enumerate_vertices(lp);
  REQUIRE(verts.size() == 2);
  CHECK(verts[0].point.isApprox(v({0.0, 3.0})));
  CHECK(verts[1].point.isApprox(v({3.0, 0.0})));
}

TEST_CASE("tied objective is not unique") {
  auto lp = make_lp(v({1.0, 1.0}));
  add_eq(lp, v({1.0, 1.0}), 2.0);
  const auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.value == doctest::Approx(2.0));
  CHECK_FALSE(sol.is_unique);
}

TEST_CASE("unbounded objective") {
  auto lp = make_lp(v({-1.0, 0.0}));
  add_ub(lp, v({0.0, 1.0}), 1.0);
  CHECK(solve_lp(lp).status == LpStatus::Unbounded);
}

TEST_CASE("free variables") {
  // minimize x s.t. x >= -2 written as -x <= 2
  auto lp = make_lp(v({1.0}), false);
  add_ub(lp, v({-1.0}), 2.0);
  const auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.value == doctest::Approx(-2.0));
}

TEST_CASE("vertex of the single-buffer allocation polyhedron") {
  const auto verts = enumerate_vertices(n1_allocation_lp());
  REQUIRE(verts.size() == 1);
  CHECK(verts[0].point.isApprox(v({1.0, 1.0})));
  CHECK(verts[0].value == doctest::Approx(1.0));
}

TEST_CASE("malformed programs") {
  LinearProgram lp = make_lp(v({1.0, 1.0}));
  lp.eq_lhs = Matrix::Ones(1, 3);
  lp.eq_rhs = v({1.0});
  try {
    solve_lp(lp);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  auto nan_lp = make_lp(v({std::numeric_limits<double>::quiet_NaN()}));
  CHECK_THROWS_AS(validate(nan_lp), Error);

  auto big = make_lp(Vector::Ones(13));
  try {
    enumerate_vertices(big);
    FAIL("expected TooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLarge);
  }
}

TEST_CASE("random small programs agree with vertex enumeration") {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> coef(-3, 3);
  std::uniform_int_distribution<int> pos(1, 4);
  int optimal = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 2 + trial % 4;
    const int me = trial % 2;
    const int mu = 1 + trial % 3;
    Vector c(n);
    for (int k = 0; k < n; ++k) c[k] = coef(gen);
    auto lp = make_lp(c);
    for (int i = 0; i < me; ++i) {
      Vector row(n);
      for (int k = 0; k < n; ++k) row[k] = pos(gen);
      add_eq(lp, row, pos(gen) * 2.0);
    }
    for (int i = 0; i < mu; ++i) {
      Vector row(n);
      for (int k = 0; k < n; ++k) row[k] = coef(gen);
      add_ub(lp, row, pos(gen));
    }
    // keep the polyhedron bounded so that vertices decide the optimum
    add_ub(lp, Vector::Ones(n), 10.0);

    const auto sol = solve_lp(lp);
    const auto verts = enumerate_vertices(lp);
    CAPTURE(trial);
    if (verts.empty()) {
      CHECK(sol.status == LpStatus::Infeasible);
      continue;
    }
    REQUIRE(sol.status == LpStatus::Optimal);
    ++optimal;
    double best = verts.front().value;
    for (const auto& vx : verts) best = std::min(best, vx.value);
    CHECK(std::abs(sol.value - best) <= 1e-9);
    CHECK(feasible(lp, sol.point));
    CHECK(std::abs(c.dot(sol.point) - sol.value) <= 1e-9);

    int attaining = 0;
    for (const auto& vx : verts) attaining += std::abs(vx.value - best) <= 1e-9;
    CHECK(sol.is_unique == (attaining == 1));

    // weak duality with equality at the optimum
    const double dv = dual_value(lp, sol.dual_point);
    CHECK(sol.value >= dv - 1e-9);
    CHECK(std::abs(sol.value - dv) <= 1e-8);
  }
  CHECK(optimal > 100);
}

TEST_CASE("enumerated vertices are sorted and distinct") {
  auto lp = make_lp(v({1.0, 1.0, 1.0}));
  add_ub(lp, v({1.0, 1.0, 1.0}), 1.0);
  const auto verts = enumerate_vertices(lp);
  REQUIRE(verts.size() == 4);
  for (std::size_t k = 1; k < verts.size(); ++k) {
    const auto& a = verts[k - 1].point;
    const auto& b = verts[k].point;
    CHECK(std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()));
  }
}
