#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "mba/core.hpp"

namespace mba {

/// Principal-branch Lambert W, Halley iteration from a piecewise initial
/// guess; relative accuracy ~1e-15 over the whole domain x >= -1/e.
inline double lambert_w(double x) {
  constexpr double inv_e = 0.36787944117144233;  // 1/e
  if (x < -inv_e) {
    if (x > -inv_e - 1e-12) x = -inv_e;  // absorb representation noise
    else
      throw std::domain_error("lambert_w: argument below -1/e");
  }
  if (x == 0.0) return 0.0;

  double w;
  if (x < -0.3235) {
    // branch-point series in p = sqrt(2(e*x + 1))
    double p = std::sqrt(std::max(2.0 * (std::exp(1.0) * x + 1.0), 0.0));
    w = -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0;
  } else if (x < std::exp(1.0)) {
    w = x / (1.0 + x);
  } else {
    double l1 = std::log(x), l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }

  for (int it = 0; it < 64; ++it) {
    double ew = std::exp(w);
    double f = w * ew - x;
    if (f == 0.0) break;
    double denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
    double step = f / denom;
    if (!std::isfinite(step)) break;  // pinned at the branch point
    w -= step;
    if (std::abs(step) <= 1e-16 * (1.0 + std::abs(w))) break;
  }
  return w;
}

/// Equivalent per-block channel gains H[i*N + n]: worst requesting device's
/// gain for broadcast blocks, 0 otherwise.
inline std::vector<double> equivalent_channels(const SelectionMatrix& sel,
                                               const Scenario& sc) {
  std::vector<double> h(
      static_cast<std::size_t>(sel.models()) * sel.positions(), 0.0);
  for (int i = 0; i < sel.models(); ++i)
    for (int n = 0; n < sel.positions(); ++n) {
      if (!sel.broadcast(i, n)) continue;
      double worst = std::numeric_limits<double>::infinity();
      for (int k = 0; k < sel.devices(); ++k)
        if (sel.device(i, n, k)) worst = std::min(worst, sc.gain[k]);
      h[static_cast<std::size_t>(i) * sel.positions() + n] =
          std::isfinite(worst) ? worst : 0.0;
    }
  return h;
}

struct BlockPower {
  double power_w = 0.0;
  double latency_s = 0.0;
};

/// Closed-form per-block power/latency for a given multiplier beta; the pair
/// satisfies T * B * log2(1 + p*H/N0) = Q identically.
inline BlockPower block_power(double beta, double h, const Scenario& sc) {
  if (!(beta > 0.0) || !(h > 0.0))
    throw std::domain_error("block_power requires beta > 0 and H > 0");
  const double bn = beta * sc.noise_w;
  double w = lambert_w((h - bn) / (bn * std::exp(1.0)));
  BlockPower bp;
  bp.power_w = sc.noise_w / h * (std::exp(w + 1.0) - 1.0);
  bp.latency_s = sc.block_bits * std::numbers::ln2 / (sc.bandwidth_hz * (w + 1.0));
  return bp;
}

/// Total energy consumed by the closed-form schedule at a given beta;
/// strictly decreasing in beta. Compensated summation keeps the value
/// independent of block ordering.
inline double energy_of_beta(double beta, const std::vector<double>& channels,
                             const Scenario& sc) {
  double sum = 0.0, comp = 0.0;
  for (double h : channels) {
    if (h <= 0.0) continue;
    BlockPower bp = block_power(beta, h, sc);
    double term = bp.power_w * bp.latency_s - comp;
    double next = sum + term;
    comp = (next - sum) - term;
    sum = next;
  }
  return sum;
}

/// Wideband energy floor: the infimum of energy_of_beta as beta -> infinity.
inline double energy_floor(const std::vector<double>& channels,
                           const Scenario& sc) {
  double sum = 0.0;
  for (double h : channels)
    if (h > 0.0)
      sum += sc.block_bits * std::numbers::ln2 * sc.noise_w /
             (sc.bandwidth_hz * h);
  return sum;
}

struct Multiplier {
  double beta = 0.0;
  double residual = 0.0;  // |energy(beta) - E|
};

/// Solves the energy-budget equation for beta by geometric bracket expansion
/// followed by bisection on the monotone energy curve.
inline Multiplier solve_beta(const std::vector<double>& channels,
                             const Scenario& sc, double tol = 1e-9) {
  const double floor = energy_floor(channels, sc);
  const double budget = sc.energy_budget_j;
  if (!(budget > floor * (1.0 + 1e-12)))
    throw infeasible_error("energy budget " + std::to_string(budget) +
                           " J at or below the wideband floor " +
                           std::to_string(floor) + " J");

  double lo = 1.0, hi = 1.0;  // energy(lo) >= E >= energy(hi)
  int guard = 0;
  while (energy_of_beta(lo, channels, sc) < budget) {
    lo /= 16.0;
    if (++guard > 400) throw solver_error("solve_beta: bracket expansion failed (low side)");
  }
  guard = 0;
  while (energy_of_beta(hi, channels, sc) > budget) {
    hi *= 16.0;
    if (++guard > 400) throw solver_error("solve_beta: bracket expansion failed (high side)");
  }

  double beta = std::sqrt(lo * hi), energy = 0.0;
  for (int it = 0; it < 400; ++it) {
    beta = std::sqrt(lo * hi);  // geometric bisection
    energy = energy_of_beta(beta, channels, sc);
    if (std::abs(energy - budget) <= tol * budget) break;
    if (energy > budget)
      lo = beta;
    else
      hi = beta;
  }
  return {beta, std::abs(energy - budget)};
}

/// Optimal power control for a broadcast selection: solves for beta, then
/// fills the per-block closed form. Consumes the whole budget.
inline PowerSchedule optimal_power_control(const SelectionMatrix& sel,
                                           const Scenario& sc,
                                           double tol = 1e-9) {
  std::vector<double> channels = equivalent_channels(sel, sc);
  PowerSchedule sched;
  sched.models = sel.models();
  sched.positions = sel.positions();
  sched.power_w.assign(channels.size(), 0.0);
  sched.latency_s.assign(channels.size(), 0.0);
  bool any = std::any_of(channels.begin(), channels.end(),
                         [](double h) { return h > 0.0; });
  if (!any) return sched;

  Multiplier mult = solve_beta(channels, sc, tol);
  sched.beta = mult.beta;
  for (std::size_t b = 0; b < channels.size(); ++b) {
    if (channels[b] <= 0.0) continue;
    BlockPower bp = block_power(mult.beta, channels[b], sc);
    sched.power_w[b] = bp.power_w;
    sched.latency_s[b] = bp.latency_s;
    sched.total_latency_s += bp.latency_s;
    sched.total_energy_j += bp.power_w * bp.latency_s;
  }
  return sched;
}

/// Power allocation over an explicit channel list (used by the unicast
/// baseline, where each transmission rides its receiver's own channel).
struct AllocatedPower {
  double beta = 0.0;
  std::vector<BlockPower> blocks;
  double total_latency_s = 0.0;
  double total_energy_j = 0.0;
};

inline AllocatedPower allocate_power(const std::vector<double>& channels,
                                     const Scenario& sc, double tol = 1e-9) {
  AllocatedPower out;
  Multiplier mult = solve_beta(channels, sc, tol);
  out.beta = mult.beta;
  out.blocks.reserve(channels.size());
  for (double h : channels) {
    BlockPower bp = h > 0.0 ? block_power(mult.beta, h, sc) : BlockPower{};
    out.total_latency_s += bp.latency_s;
    out.total_energy_j += bp.power_w * bp.latency_s;
    out.blocks.push_back(bp);
  }
  return out;
}

/// Stationarity and complementary-slackness residuals of the KKT system,
/// reconstructing the worst-requester multiplier per block. All residuals are
/// relative (normalized units).
struct KktReport {
  double stationarity_t = 0.0;  // defines lambda; reported for completeness
  double stationarity_p = 0.0;  // the nontrivial stationarity check
  double rate_slackness = 0.0;  // lambda * (Q - T*R) at the worst requester
  double rate_feasibility = 0.0;  // max QoS-rate shortfall over all requesters
  double energy_slackness = 0.0;  // beta * (sum T*p - E), normalized

  double max_residual() const {
    return std::max({stationarity_t, stationarity_p, rate_slackness,
                     rate_feasibility, energy_slackness});
  }
  bool ok(double tol = 1e-6) const { return max_residual() <= tol; }
};

inline KktReport kkt_residuals(const PowerSchedule& sched,
                               const SelectionMatrix& sel,
                               const Scenario& sc) {
  KktReport rep;
  const double beta = sched.beta;
  double energy = 0.0;
  for (int i = 0; i < sel.models(); ++i)
    for (int n = 0; n < sel.positions(); ++n) {
      if (!sel.broadcast(i, n)) continue;
      const double p = sched.power(i, n);
      const double t = sched.latency(i, n);
      energy += p * t;

      double worst = std::numeric_limits<double>::infinity();
      for (int k = 0; k < sel.devices(); ++k)
        if (sel.device(i, n, k)) worst = std::min(worst, sc.gain[k]);

      const double rate =
          sc.bandwidth_hz * std::log2(1.0 + p * worst / sc.noise_w);
      // dL/dT = 0 defines lambda for the worst requester (0 for the rest).
      const double lambda = (1.0 + beta * p) / rate;
      rep.stationarity_t =
          std::max(rep.stationarity_t,
                   std::abs(1.0 + beta * p - lambda * rate) / (1.0 + beta * p));
      // dL/dp = 0: beta = lambda * B * H / (ln2 * (N0 + p*H))
      const double grad = lambda * sc.bandwidth_hz * worst /
                          (std::numbers::ln2 * (sc.noise_w + p * worst));
      rep.stationarity_p =
          std::max(rep.stationarity_p, std::abs(beta - grad) / beta);
      rep.rate_slackness =
          std::max(rep.rate_slackness,
                   std::abs(lambda * (sc.block_bits - t * rate)) /
                       (lambda * sc.block_bits));
      for (int k = 0; k < sel.devices(); ++k) {
        if (!sel.device(i, n, k)) continue;
        double rk =
            sc.bandwidth_hz * std::log2(1.0 + p * sc.gain[k] / sc.noise_w);
        double shortfall = (sc.block_bits - t * rk) / sc.block_bits;
        rep.rate_feasibility = std::max(rep.rate_feasibility, shortfall);
      }
    }
  rep.rate_feasibility = std::max(rep.rate_feasibility, 0.0);
  rep.energy_slackness =
      std::abs(energy - sc.energy_budget_j) / sc.energy_budget_j;
  return rep;
}

}  // namespace mba
