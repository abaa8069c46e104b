#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "mba/power.hpp"
#include "mba/rng.hpp"

using namespace mba;

namespace {

Scenario radio(double energy = 250.0) {
  Scenario sc;
  sc.devices = 1;
  sc.gain = {1e-3};
  sc.qos = {0.0};
  sc.bandwidth_hz = 1e8;
  sc.noise_w = 0.05;
  sc.block_bits = 5e6;
  sc.energy_budget_j = energy;
  return sc;
}

}  // namespace

TEST_CASE("Lambert W spot values") {
  REQUIRE(lambert_w(0.0) == 0.0);
  REQUIRE(lambert_w(std::exp(1.0)) == Catch::Approx(1.0).margin(1e-14));
  // Frozen Newton-oracle value of W(1) (the omega constant).
  REQUIRE(lambert_w(1.0) == Catch::Approx(0.5671432904097838).margin(1e-14));
  REQUIRE(lambert_w(-1.0 / std::exp(1.0)) == Catch::Approx(-1.0).margin(1e-6));
  REQUIRE_THROWS_AS(lambert_w(-0.5), std::domain_error);
}

TEST_CASE("Lambert W identity over the domain") {
  // Log-spaced positive arguments plus a dense sample near the branch point.
  for (int e = -8; e <= 8; ++e)
    for (double mant : {1.0, 2.5, 7.0}) {
      double x = mant * std::pow(10.0, e);
      double w = lambert_w(x);
      REQUIRE(w * std::exp(w) == Catch::Approx(x).epsilon(1e-12));
    }
  for (int s = 1; s <= 40; ++s) {
    double x = -1.0 / std::exp(1.0) + 1e-9 * std::pow(1.6, s);
    if (x >= 0.0) break;
    double w = lambert_w(x);
    REQUIRE(w * std::exp(w) == Catch::Approx(x).margin(1e-12));
  }
}

TEST_CASE("equivalent channels take the worst requester") {
  Scenario sc = radio();
  sc.devices = 2;
  sc.gain = {0.5e-3, 0.2e-3};
  sc.qos = {0.0, 0.0};

  SelectionMatrix sel(2, 2, 2);
  sel.set_device(0, 0, 0, true);
  sel.set_device(0, 0, 1, true);
  sel.set_device(1, 1, 0, true);
  sel.rebuild_broadcast();

  std::vector<double> h = equivalent_channels(sel, sc);
  REQUIRE(h[0 * 2 + 0] == Catch::Approx(0.2e-3));  // both request: min
  REQUIRE(h[1 * 2 + 1] == Catch::Approx(0.5e-3));  // sole requester
  REQUIRE(h[0 * 2 + 1] == 0.0);                    // not broadcast
}

TEST_CASE("closed-form block power") {
  Scenario sc = radio();

  SECTION("W argument zero collapses the form") {
    // beta = H/N0 makes the Lambert argument 0, so W = 0.
    BlockPower bp = block_power(1e-3 / 0.05, 1e-3, sc);
    REQUIRE(bp.power_w ==
            Catch::Approx(0.05 / 1e-3 * (std::exp(1.0) - 1.0)).epsilon(1e-12));
    REQUIRE(bp.latency_s ==
            Catch::Approx(5e6 * std::log(2.0) / 1e8).epsilon(1e-12));
  }

  SECTION("frozen forward evaluation") {
    BlockPower bp = block_power(0.02, 1e-3, sc);
    REQUIRE(bp.power_w == Catch::Approx(85.91409142295226).epsilon(1e-12));
    REQUIRE(bp.latency_s ==
            Catch::Approx(0.034657359027997265).epsilon(1e-12));
    REQUIRE(bp.power_w * bp.latency_s ==
            Catch::Approx(2.977555512009437).epsilon(1e-12));
  }

  SECTION("rate tightness holds for any beta") {
    for (double beta : {1e-4, 0.02, 1.0, 50.0}) {
      BlockPower bp = block_power(beta, 1e-3, sc);
      double rate = sc.bandwidth_hz *
                    std::log2(1.0 + bp.power_w * 1e-3 / sc.noise_w);
      REQUIRE(bp.latency_s * rate == Catch::Approx(sc.block_bits).epsilon(1e-9));
    }
  }

  REQUIRE_THROWS_AS(block_power(0.0, 1e-3, sc), std::domain_error);
  REQUIRE_THROWS_AS(block_power(0.02, 0.0, sc), std::domain_error);
}

TEST_CASE("energy curve is a strictly decreasing sum of per-block energies") {
  Scenario sc = radio();
  std::vector<double> channels{1e-3, 0.4e-3, 2.5e-3};

  double expect = 0.0;
  for (double h : channels) {
    BlockPower bp = block_power(0.02, h, sc);
    expect += bp.power_w * bp.latency_s;
  }
  REQUIRE(energy_of_beta(0.02, channels, sc) ==
          Catch::Approx(expect).epsilon(1e-12));
  REQUIRE(energy_of_beta(0.04, channels, sc) <
          energy_of_beta(0.02, channels, sc));

  // Single block at the collapsed point.
  std::vector<double> one{1e-3};
  REQUIRE(energy_of_beta(1e-3 / 0.05, one, sc) ==
          Catch::Approx(5e6 * std::log(2.0) / 1e8 * 0.05 / 1e-3 *
                        (std::exp(1.0) - 1.0))
              .epsilon(1e-12));
}

TEST_CASE("energy floor and infeasible budgets") {
  Scenario sc = radio(1.0);
  std::vector<double> one{1e-3};
  // Frozen Q*ln2*N0/(B*H).
  REQUIRE(energy_floor(one, sc) ==
          Catch::Approx(1.7328679513998633).epsilon(1e-12));
  REQUIRE_THROWS_AS(solve_beta(one, sc), infeasible_error);
}

TEST_CASE("multiplier solve inverts the forward evaluation") {
  Scenario sc = radio(2.977555512009437);
  std::vector<double> one{1e-3};
  Multiplier m = solve_beta(one, sc);
  REQUIRE(m.beta == Catch::Approx(0.02).epsilon(1e-6));
  REQUIRE(m.residual <= 1e-9 * sc.energy_budget_j);
}

TEST_CASE("latency decreases as the budget grows") {
  std::vector<double> channels{1e-3, 0.6e-3};
  double prev = std::numeric_limits<double>::infinity();
  for (double e : {10.0, 40.0, 160.0, 640.0}) {
    Scenario sc = radio(e);
    sc.gain = channels;
    sc.devices = 2;
    sc.qos = {0.0, 0.0};
    Multiplier m = solve_beta(channels, sc);
    double latency = 0.0;
    for (double h : channels) latency += block_power(m.beta, h, sc).latency_s;
    REQUIRE(latency < prev);
    prev = latency;
  }
}

TEST_CASE("optimal power control consumes the whole budget") {
  Scenario sc = radio(25.0);
  sc.devices = 2;
  sc.gain = {1e-3, 0.7e-3};
  sc.qos = {0.0, 0.0};

  SECTION("single block") {
    SelectionMatrix sel(1, 1, 2);
    sel.set_device(0, 0, 0, true);
    sel.rebuild_broadcast();
    PowerSchedule s = optimal_power_control(sel, sc);
    REQUIRE(s.total_energy_j == Catch::Approx(25.0).epsilon(1e-8));
    REQUIRE(s.latency(0, 0) == Catch::Approx(s.total_latency_s));
  }

  SECTION("equal channels get equal power and latency") {
    SelectionMatrix sel(2, 1, 2);
    sel.set_device(0, 0, 0, true);
    sel.set_device(1, 0, 0, true);
    sel.rebuild_broadcast();
    PowerSchedule s = optimal_power_control(sel, sc);
    REQUIRE(s.power(0, 0) == Catch::Approx(s.power(1, 0)));
    REQUIRE(s.latency(0, 0) == Catch::Approx(s.latency(1, 0)));
  }

  SECTION("empty selection yields a zero schedule") {
    SelectionMatrix sel(2, 2, 2);
    PowerSchedule s = optimal_power_control(sel, sc);
    REQUIRE(s.total_latency_s == 0.0);
    REQUIRE(s.total_energy_j == 0.0);
  }
}

TEST_CASE("explicit-channel allocation matches per-block closed form") {
  Scenario sc = radio(60.0);
  std::vector<double> channels{1e-3, 0.5e-3, 2e-3, 0.0};
  AllocatedPower alloc = allocate_power(channels, sc);
  REQUIRE(alloc.total_energy_j == Catch::Approx(60.0).epsilon(1e-8));
  REQUIRE(alloc.blocks.size() == 4);
  REQUIRE(alloc.blocks[3].power_w == 0.0);
  double latency = 0.0;
  for (const auto& b : alloc.blocks) latency += b.latency_s;
  REQUIRE(alloc.total_latency_s == Catch::Approx(latency));
}

TEST_CASE("KKT residuals vanish at the optimum and flag perturbations") {
  Scenario sc = radio(30.0);
  sc.devices = 3;
  sc.gain = {1e-3, 0.4e-3, 2e-3};
  sc.qos = {0.0, 0.0, 0.0};

  SelectionMatrix sel(2, 2, 3);
  sel.set_device(0, 0, 0, true);
  sel.set_device(0, 0, 1, true);
  sel.set_device(1, 0, 2, true);
  sel.set_device(0, 1, 1, true);
  sel.rebuild_broadcast();

  PowerSchedule s = optimal_power_control(sel, sc);
  KktReport rep = kkt_residuals(s, sel, sc);
  REQUIRE(rep.ok(1e-6));

  s.power_w[0] *= 1.01;  // break rate tightness on one block
  KktReport bad = kkt_residuals(s, sel, sc);
  REQUIRE_FALSE(bad.ok(1e-6));
  REQUIRE(bad.rate_slackness > 1e-6);
}
