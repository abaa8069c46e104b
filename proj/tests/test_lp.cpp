#include <limits>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "mba/lp.hpp"

using namespace mba;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("box-only minimum sits at the lower bound") {
  LinearProgram lp;
  lp.add_variable(1.0, 0.0, 1.0);
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  REQUIRE(s.value == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(s.x[0] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("contradictory rows are infeasible") {
  LinearProgram lp;
  lp.add_variable(1.0, 0.0, 1.0);
  lp.add_row({{0, 1.0}}, '>', 2.0);
  REQUIRE(solve_lp(lp).status == LpStatus::Infeasible);
}

TEST_CASE("two-variable LP solves to the hand-derived vertex") {
  // min x + y  s.t.  x + 2y >= 2,  2x + y >= 2,  x, y in [0, 2].
  LinearProgram lp;
  lp.add_variable(1.0, 0.0, 2.0);
  lp.add_variable(1.0, 0.0, 2.0);
  lp.add_row({{0, 1.0}, {1, 2.0}}, '>', 2.0);
  lp.add_row({{0, 2.0}, {1, 1.0}}, '>', 2.0);

  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  REQUIRE(s.value == Catch::Approx(4.0 / 3.0));
  REQUIRE(s.x[0] == Catch::Approx(2.0 / 3.0));
  REQUIRE(s.x[1] == Catch::Approx(2.0 / 3.0));
  // Strong duality: the dual certificate matches the primal value.
  REQUIRE(s.dual_value == Catch::Approx(s.value).margin(1e-9));
}

TEST_CASE("equality rows and nonzero lower bounds") {
  // min 2x + 3y  s.t.  x + y = 4,  x in [1, 3], y in [0, inf).
  LinearProgram lp;
  lp.add_variable(2.0, 1.0, 3.0);
  lp.add_variable(3.0, 0.0, kInf);
  lp.add_row({{0, 1.0}, {1, 1.0}}, '=', 4.0);
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  REQUIRE(s.value == Catch::Approx(9.0));  // x = 3, y = 1
  REQUIRE(s.x[0] == Catch::Approx(3.0));
  REQUIRE(s.x[1] == Catch::Approx(1.0));
}

TEST_CASE("unbounded objective is detected") {
  LinearProgram lp;
  lp.add_variable(-1.0, 0.0, kInf);
  REQUIRE(solve_lp(lp).status == LpStatus::Unbounded);
}

TEST_CASE("fixed variables are substituted") {
  // x fixed at 2; min y s.t. y >= 3 - x.
  LinearProgram lp;
  lp.add_variable(0.0, 2.0, 2.0);
  lp.add_variable(1.0, 0.0, kInf);
  lp.add_row({{0, 1.0}, {1, 1.0}}, '>', 3.0);
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  REQUIRE(s.value == Catch::Approx(1.0));
  REQUIRE(s.x[0] == Catch::Approx(2.0));
}

TEST_CASE("degenerate LPs terminate") {
  // Many redundant rows through the same vertex; exercises the anti-cycling
  // fallback without asserting anything about pivot counts.
  LinearProgram lp;
  for (int v = 0; v < 4; ++v) lp.add_variable(1.0, 0.0, kInf);
  for (int r = 0; r < 4; ++r) {
    std::vector<std::pair<int, double>> row;
    for (int v = 0; v < 4; ++v) row.push_back({v, 1.0});
    lp.add_row(std::move(row), '>', 1.0);
  }
  lp.add_row({{0, 1.0}, {1, 1.0}}, '>', 0.5);
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  REQUIRE(s.value == Catch::Approx(1.0));
}

TEST_CASE("row validation") {
  LinearProgram lp;
  lp.add_variable(1.0, 0.0, 1.0);
  REQUIRE_THROWS_AS(lp.add_row({{3, 1.0}}, '<', 1.0), config_error);
  REQUIRE_THROWS_AS(lp.add_row({{0, 1.0}}, '?', 1.0), config_error);
}

TEST_CASE("rounding report accepts integral points") {
  Library lib = Library::identity(2, 1, 2);
  ScoreTable t(2, 1, 2);
  t(0, 0, 0) = 1.0;
  t(1, 0, 1) = 1.0;
  std::vector<double> qos{0.5, 0.5};

  // Variables: device vars (k*N+n)*M+i, then broadcast vars.
  std::vector<double> x{1.0, 0.0, 0.0, 1.0, 1.0, 1.0};
  RoundingReport rep = round_and_check(x, lib, t, qos);
  REQUIRE(rep.ok);
  REQUIRE(rep.violations.empty());
  REQUIRE(rep.selection.device(0, 0, 0));
  REQUIRE(rep.selection.device(1, 0, 1));
}

TEST_CASE("rounding report flags fractional one-hot groups") {
  Library lib = Library::identity(2, 1, 1);
  ScoreTable t(2, 1, 1);
  t(0, 0, 0) = 1.0;
  std::vector<double> qos{0.5};

  std::vector<double> x{0.5, 0.5, 0.5, 0.5};
  RoundingReport rep = round_and_check(x, lib, t, qos);
  REQUIRE_FALSE(rep.ok);
  REQUIRE_FALSE(rep.violations.empty());
}
