#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "mba/rng.hpp"
#include "mba/selection.hpp"

using namespace mba;

namespace {

ScoreTable random_table(int models, int positions, int tasks,
                        std::uint64_t seed) {
  ScoreTable t(models, positions, tasks);
  Rng rng(seed);
  for (double& v : t.raw()) v = rng.uniform();
  return t;
}

std::vector<double> scaled_qos(const Library& lib, const ScoreTable& t,
                               double rho) {
  std::vector<double> qos(lib.tasks());
  for (int k = 0; k < lib.tasks(); ++k)
    qos[k] = rho * t.model_score(lib.task_model[k], k);
  return qos;
}

}  // namespace

TEST_CASE("candidate set construction") {
  Library lib = Library::identity(3, 3, 1);
  ScoreTable t(3, 3, 1);
  // Own model 0 blocks: 0.5, 0.3, 0.2 (score 1.0). Best replacement at each
  // position: model 1 = {0.4, 0.25, 0.18}, model 2 lower everywhere.
  t(0, 0, 0) = 0.5;  t(0, 1, 0) = 0.3;  t(0, 2, 0) = 0.2;
  t(1, 0, 0) = 0.4;  t(1, 1, 0) = 0.25; t(1, 2, 0) = 0.18;
  t(2, 0, 0) = 0.1;  t(2, 1, 0) = 0.1;  t(2, 2, 0) = 0.1;

  SECTION("strict threshold keeps only the seed") {
    auto set = build_candidate_set(0, lib, t, 1.0);
    REQUIRE(set.size() == 1);
    REQUIRE(set[0].blocks == std::vector<int>{0, 0, 0});
    REQUIRE(set[0].score == Catch::Approx(1.0));
  }

  SECTION("zero threshold walks all positions, highest score first") {
    auto set = build_candidate_set(0, lib, t, 0.0);
    REQUIRE(set.size() == 4);
    // Swap order by descending own score: position 0, then 1, then 2;
    // swaps accumulate.
    REQUIRE(set[1].blocks == std::vector<int>{1, 0, 0});
    REQUIRE(set[1].score == Catch::Approx(0.9));
    REQUIRE(set[2].blocks == std::vector<int>{1, 1, 0});
    REQUIRE(set[2].score == Catch::Approx(0.85));
    REQUIRE(set[3].blocks == std::vector<int>{1, 1, 1});
    REQUIRE(set[3].score == Catch::Approx(0.83));
  }

  SECTION("construction stops at the first violating candidate") {
    auto set = build_candidate_set(0, lib, t, 0.88);
    REQUIRE(set.size() == 2);  // seed and the first swap only
  }

  SECTION("seed below threshold is infeasible") {
    REQUIRE_THROWS_AS(build_candidate_set(0, lib, t, 1.5), infeasible_error);
  }
}

TEST_CASE("distance against the selected union") {
  CandidateModel cand;
  cand.blocks = {0, 1, 0, 1};  // positions 0..3
  int positions = 4;
  std::vector<std::uint8_t> unioned(2 * positions, 0);
  REQUIRE(distance(cand, unioned, positions) == 4);

  // Add exactly the candidate's blocks: distance drops to 0.
  for (int n = 0; n < 4; ++n)
    unioned[static_cast<std::size_t>(cand.blocks[n]) * positions + n] = 1;
  REQUIRE(distance(cand, unioned, positions) == 0);

  // Half overlap.
  std::fill(unioned.begin(), unioned.end(), 0);
  unioned[0 * positions + 0] = 1;
  unioned[1 * positions + 1] = 1;
  REQUIRE(distance(cand, unioned, positions) == 2);
}

TEST_CASE("reappearance counts block matches in unprocessed sets") {
  CandidateModel cand;
  cand.blocks = {0, 1};

  std::vector<std::vector<CandidateModel>> sets(3);
  sets[1].push_back({{0, 1}, 0.0});  // identical: 2 matches
  sets[1].push_back({{0, 0}, 0.0});  // 1 match
  sets[2].push_back({{1, 1}, 0.0});  // 1 match

  std::vector<int> order{0, 1, 2};
  REQUIRE(reappearance(cand, sets, order, 1) == 4);
  REQUIRE(reappearance(cand, sets, order, 2) == 1);
  REQUIRE(reappearance(cand, sets, order, 3) == 0);  // no remaining sets
}

TEST_CASE("greedy selection on degenerate shapes") {
  SECTION("single device broadcasts one model") {
    Library lib = Library::identity(2, 3, 1);
    ScoreTable t = random_table(2, 3, 1, 5);
    auto qos = scaled_qos(lib, t, 1.0);  // only the seed qualifies
    SelectionResult r = greedy_select(lib, t, qos);
    REQUIRE(r.objective == 3);
    for (int n = 0; n < 3; ++n) REQUIRE(r.selection.device(0, n, 0));
  }

  SECTION("identical tasks share one block set") {
    Library lib = Library::identity(3, 2, 3);
    ScoreTable t(3, 2, 3);
    for (double& v : t.raw()) v = 0.5;  // every block equivalent for every task
    std::vector<double> qos(3, 0.9);
    SelectionResult r = greedy_select(lib, t, qos);
    REQUIRE(r.objective == 2);  // all devices converge on one shared model
  }
}

TEST_CASE("greedy matches the optimum on a scripted 3-device instance") {
  Library lib = Library::identity(3, 2, 3);
  ScoreTable t = random_table(3, 2, 3, 321);
  auto qos = scaled_qos(lib, t, 0.7);
  SelectionResult g = greedy_select(lib, t, qos);
  BnBResult b = bnb_select(lib, t, qos);
  REQUIRE(b.objective <= g.objective);
  REQUIRE(g.selection.broadcast_count() == g.objective);
}

TEST_CASE("root relaxation bounds the integer optimum") {
  Library lib = Library::identity(2, 2, 2);
  ScoreTable t = random_table(2, 2, 2, 9);
  auto qos = scaled_qos(lib, t, 0.8);

  BnBNode root;
  LpSolution sol = solve_lp(relaxed_lp(root, lib, t, qos));
  REQUIRE(sol.status == LpStatus::Optimal);
  BnBResult b = bnb_select(lib, t, qos);
  REQUIRE(sol.value <= b.objective + 1e-9);
  REQUIRE(b.root_bound == Catch::Approx(sol.value));
}

TEST_CASE("branch and bound equals brute force on random small instances") {
  Rng rng(2025);
  for (int trial = 0; trial < 40; ++trial) {
    int m = 2 + static_cast<int>(rng.below(2));
    int np = 1 + static_cast<int>(rng.below(3));
    int kk = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    Library lib = Library::identity(m, np, kk);
    ScoreTable t = random_table(m, np, kk, rng.bits());
    auto qos = scaled_qos(lib, t, 0.6 + 0.3 * rng.uniform());

    BnBResult b = bnb_select(lib, t, qos);
    SelectionResult bf = brute_force_select(lib, t, qos);
    INFO("trial " << trial << " m=" << m << " n=" << np << " k=" << kk);
    REQUIRE(b.objective == bf.objective);
  }
}

TEST_CASE("infeasible thresholds raise on every selector") {
  Library lib = Library::identity(2, 2, 1);
  ScoreTable t = random_table(2, 2, 1, 77);
  std::vector<double> qos{10.0};  // unreachable
  REQUIRE_THROWS_AS(greedy_select(lib, t, qos), infeasible_error);
  REQUIRE_THROWS_AS(bnb_select(lib, t, qos), infeasible_error);
  REQUIRE_THROWS_AS(brute_force_select(lib, t, qos), infeasible_error);
}

TEST_CASE("sequential minimum block count agrees with brute force") {
  SECTION("single device needs exactly N blocks") {
    Library lib = Library::identity(2, 3, 1);
    ScoreTable t = random_table(2, 3, 1, 3);
    auto qos = scaled_qos(lib, t, 0.5);
    REQUIRE(min_broadcast_blocks_sequential(lib, t, qos) == 3);
  }

  SECTION("disjoint tasks need K*N blocks") {
    Library lib = Library::identity(2, 2, 2);
    ScoreTable t(2, 2, 2);
    for (int n = 0; n < 2; ++n) {
      t(0, n, 0) = 0.5;
      t(1, n, 1) = 0.5;
    }
    std::vector<double> qos{1.0, 1.0};
    REQUIRE(min_broadcast_blocks_sequential(lib, t, qos) == 4);
  }

  SECTION("random 2x2x2 instances cross-check all three searches") {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
      Library lib = Library::identity(2, 2, 2);
      ScoreTable t = random_table(2, 2, 2, rng.bits());
      auto qos = scaled_qos(lib, t, 0.75);
      int seq = min_broadcast_blocks_sequential(lib, t, qos);
      REQUIRE(seq == brute_force_select(lib, t, qos).objective);
      REQUIRE(seq == bnb_select(lib, t, qos).objective);
    }
  }
}

TEST_CASE("brute force guards its search space") {
  Library lib = Library::identity(10, 10, 10);
  ScoreTable t(10, 10, 10);
  std::vector<double> qos(10, 0.0);
  REQUIRE_THROWS_AS(brute_force_select(lib, t, qos), capacity_error);
}
