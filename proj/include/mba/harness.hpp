#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mba/core.hpp"
#include "mba/game.hpp"
#include "mba/power.hpp"
#include "mba/rng.hpp"
#include "mba/selection.hpp"

namespace mba {

enum class Selector { Greedy, BranchAndBound };
enum class SweepAxis { Energy, Devices, Rho };

/// One experiment configuration: library dimensions, radio constants,
/// synthetic-score parameters and algorithm choices. Defaults reproduce the
/// desk-scale latency experiments.
struct ExperimentConfig {
  std::uint64_t seed = 1;

  int models = 21;
  int positions = 24;  // N
  int devices = 21;    // K

  double bandwidth_hz = 1e8;
  double noise_w_total = 1e-3;  // total receiver noise power N0 (W)
  double path_loss = 1e-3;
  double block_bits = 5e6;
  double energy_budget_j = 250.0;

  GameConfig game;
  ShapleyOptions shapley;
  double rho = 0.9;

  Selector selector = Selector::Greedy;
  int bnb_variable_cap = 64;  // M*N*K above this forbids the B&B selector
  SelectionOptions selection_options;

  SweepAxis sweep_axis = SweepAxis::Energy;
  std::vector<double> sweep_grid = {200.0, 240.0, 280.0, 320.0};
  int trials = 10;

  double noise_w() const { return noise_w_total; }

  void validate() const {
    if (models < 1 || positions < 1 || devices < 1)
      throw config_error("M, N, K must all be >= 1");
    if (models < devices)
      throw config_error("library must hold a task-specific model per device "
                         "(M >= K)");
    if (!(bandwidth_hz > 0) || !(noise_w_total > 0) ||
        !(path_loss > 0) || !(block_bits > 0) || !(energy_budget_j > 0))
      throw config_error("radio parameters must be positive");
    if (!(rho > 0.0) || !(rho > 0.0 && rho <= 1.0))
      throw config_error("rho must lie in (0, 1]");
    if (trials < 1) throw config_error("trials must be >= 1");
    if (selector == Selector::BranchAndBound &&
        models * positions * devices > bnb_variable_cap)
      throw config_error("branch-and-bound selector exceeds the variable cap "
                         "(M*N*K > " + std::to_string(bnb_variable_cap) + ")");
  }
};

/// Rayleigh-fading channel gains: H_k = path_loss * X_k with X_k unit-mean
/// exponential. Each device draws from its own derived substream, so H_k is
/// stable when K changes.
inline std::vector<double> sample_channels(int devices, double path_loss,
                                           std::uint64_t seed) {
  std::vector<double> h(devices);
  for (int k = 0; k < devices; ++k) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(k)));
    h[k] = path_loss * rng.exponential();
  }
  return h;
}

/// A fully materialized trial: library, score table and radio scenario.
struct Instance {
  Library library;
  ScoreTable table;
  Scenario scenario;
};

inline Instance make_instance(const ExperimentConfig& cfg,
                              std::uint64_t trial_seed) {
  cfg.validate();
  Instance inst;
  inst.library.models = cfg.models;
  inst.library.positions = cfg.positions;

  // Seeded injective task-to-model draw.
  std::vector<int> pool(cfg.models);
  std::iota(pool.begin(), pool.end(), 0);
  Rng task_rng(Rng::derive(trial_seed, 0x7461736bULL));
  task_rng.shuffle(pool);
  inst.library.task_model.assign(pool.begin(), pool.begin() + cfg.devices);
  inst.library.validate();

  UtilityGame game = random_game(inst.library, cfg.game,
                                 Rng::derive(trial_seed, 0x67616d65ULL));
  ShapleyOptions shap = cfg.shapley;
  shap.seed = Rng::derive(trial_seed, 0x73686170ULL);
  inst.table = build_score_table(game, inst.library, shap).table;

  inst.scenario.devices = cfg.devices;
  inst.scenario.gain = sample_channels(cfg.devices, cfg.path_loss,
                                       Rng::derive(trial_seed, 0x6368616eULL));
  inst.scenario.qos = qos_thresholds(inst.table, inst.library, cfg.rho);
  inst.scenario.bandwidth_hz = cfg.bandwidth_hz;
  inst.scenario.noise_w = cfg.noise_w();
  inst.scenario.block_bits = cfg.block_bits;
  inst.scenario.energy_budget_j = cfg.energy_budget_j;
  inst.scenario.validate();
  return inst;
}

struct TrialResult {
  double total_latency_s = 0.0;
  double energy_used_j = 0.0;
  int blocks = 0;  // broadcast blocks (MBA) or unicast transmissions
  std::vector<double> device_score;
  bool qos_ok = false;
};

namespace detail {

inline SelectionResult run_selector(const ExperimentConfig& cfg,
                                    const Instance& inst) {
  if (cfg.selector == Selector::BranchAndBound) {
    BnBResult r = bnb_select(inst.library, inst.table, inst.scenario.qos,
                             cfg.selection_options);
    return {std::move(r.selection), r.objective};
  }
  return greedy_select(inst.library, inst.table, inst.scenario.qos,
                       cfg.selection_options);
}

inline TrialResult result_from_schedule(const SelectionMatrix& sel,
                                        const PowerSchedule& sched,
                                        const Instance& inst) {
  ScheduleReport rep =
      evaluate_schedule(sel, sched, inst.scenario, inst.table);
  if (!rep.all_ok())
    throw infeasible_error("completed trial violates a constraint: " +
                           std::string(!rep.architecture_ok
                                           ? "one-hot architecture"
                                       : !rep.qos_ok ? "QoS threshold"
                                                     : "energy budget"));
  TrialResult out;
  out.total_latency_s = rep.total_latency_s;
  out.energy_used_j = rep.total_energy_j;
  out.blocks = sel.broadcast_count();
  out.device_score = rep.device_score;
  out.qos_ok = rep.qos_ok;
  return out;
}

}  // namespace detail

/// Full MBA pipeline: synthetic scores -> parameter selection -> optimal
/// power control -> constraint evaluation.
inline TrialResult run_mba(const ExperimentConfig& cfg,
                           std::uint64_t trial_seed) {
  Instance inst = make_instance(cfg, trial_seed);
  SelectionResult sel = detail::run_selector(cfg, inst);
  PowerSchedule sched = optimal_power_control(sel.selection, inst.scenario);
  return detail::result_from_schedule(sel.selection, sched, inst);
}

/// Constant-power benchmark: identical selection, one transmit power level
/// calibrated by bisection to exhaust the energy budget.
inline TrialResult run_constant_power_mba(const ExperimentConfig& cfg,
                                          std::uint64_t trial_seed) {
  Instance inst = make_instance(cfg, trial_seed);
  SelectionResult sel = detail::run_selector(cfg, inst);
  std::vector<double> channels = equivalent_channels(sel.selection,
                                                     inst.scenario);
  const Scenario& sc = inst.scenario;

  auto energy_at = [&](double p) {
    double e = 0.0;
    for (double h : channels)
      if (h > 0.0) e += p * sc.block_bits / link_rate(p, h, sc.bandwidth_hz,
                                                      sc.noise_w);
    return e;
  };
  if (!(sc.energy_budget_j >
        energy_floor(channels, sc) * (1.0 + 1e-12)))
    throw infeasible_error("energy budget at or below the constant-power floor");

  double lo = 1.0, hi = 1.0;
  int guard = 0;
  while (energy_at(lo) > sc.energy_budget_j) {
    lo /= 16.0;
    if (++guard > 400) throw solver_error("constant-power bracket failed");
  }
  guard = 0;
  while (energy_at(hi) < sc.energy_budget_j) {
    hi *= 16.0;
    if (++guard > 400) throw solver_error("constant-power bracket failed");
  }
  double p = std::sqrt(lo * hi);
  for (int it = 0; it < 400; ++it) {
    p = std::sqrt(lo * hi);
    double e = energy_at(p);
    if (std::abs(e - sc.energy_budget_j) <= 1e-9 * sc.energy_budget_j) break;
    if (e < sc.energy_budget_j)
      lo = p;
    else
      hi = p;
  }

  PowerSchedule sched;
  sched.models = sel.selection.models();
  sched.positions = sel.selection.positions();
  sched.power_w.assign(channels.size(), 0.0);
  sched.latency_s.assign(channels.size(), 0.0);
  for (std::size_t b = 0; b < channels.size(); ++b) {
    if (channels[b] <= 0.0) continue;
    double t = sc.block_bits /
               link_rate(p, channels[b], sc.bandwidth_hz, sc.noise_w);
    sched.power_w[b] = p;
    sched.latency_s[b] = t;
    sched.total_latency_s += t;
    sched.total_energy_j += p * t;
  }
  return detail::result_from_schedule(sel.selection, sched, inst);
}

/// Channel-adaptive unicast benchmark: every device downloads its N dedicated
/// blocks over its own channel; the shared budget is split by the same
/// closed-form allocation.
inline TrialResult run_unicast(const ExperimentConfig& cfg,
                               std::uint64_t trial_seed) {
  Instance inst = make_instance(cfg, trial_seed);
  std::vector<double> channels;
  channels.reserve(static_cast<std::size_t>(cfg.devices) * cfg.positions);
  for (int k = 0; k < cfg.devices; ++k)
    for (int n = 0; n < cfg.positions; ++n)
      channels.push_back(inst.scenario.gain[k]);

  AllocatedPower alloc = allocate_power(channels, inst.scenario);
  TrialResult out;
  out.total_latency_s = alloc.total_latency_s;
  out.energy_used_j = alloc.total_energy_j;
  out.blocks = static_cast<int>(channels.size());
  out.device_score.resize(cfg.devices);
  out.qos_ok = true;
  for (int k = 0; k < cfg.devices; ++k) {
    out.device_score[k] =
        inst.table.model_score(inst.library.task_model[k], k);
    if (out.device_score[k] < inst.scenario.qos[k] - 1e-9) out.qos_ok = false;
  }
  return out;
}

/// Joint-vs-decoupled check of the PS/PC decomposition on a tiny instance:
/// enumerates every feasible selection, applies optimal power control to
/// each, and compares the joint minimum latency with the pipeline result.
struct DecouplingReport {
  double joint_latency_s = 0.0;
  double decoupled_latency_s = 0.0;
  bool both_infeasible = false;
  bool pass = false;
};

inline DecouplingReport verify_decoupling(const ExperimentConfig& cfg,
                                  std::uint64_t trial_seed,
                                  double rel_tol = 1e-6) {
  if (cfg.models > 2 || cfg.positions > 2 || cfg.devices > 2)
    throw capacity_error("verify_decoupling requires M, N, K <= 2");
  Instance inst = make_instance(cfg, trial_seed);
  const Library& lib = inst.library;
  const int kk = inst.scenario.devices;

  DecouplingReport rep;
  double joint_best = std::numeric_limits<double>::infinity();

  // Joint enumeration over all one-block-per-position assignments.
  const int choices_per_device =
      static_cast<int>(std::pow(lib.models, lib.positions));
  std::vector<int> state(kk, 0);
  bool done = false;
  while (!done) {
    SelectionMatrix sel(lib.models, lib.positions, kk);
    bool feasible = true;
    for (int k = 0; k < kk && feasible; ++k) {
      int code = state[k];
      double score = 0.0;
      for (int n = 0; n < lib.positions; ++n) {
        int i = code % lib.models;
        code /= lib.models;
        sel.set_device(i, n, k, true);
        score += inst.table(i, n, k);
      }
      feasible = score >= inst.scenario.qos[k] - 1e-12;
    }
    if (feasible) {
      sel.rebuild_broadcast();
      try {
        PowerSchedule sched = optimal_power_control(sel, inst.scenario);
        joint_best = std::min(joint_best, sched.total_latency_s);
      } catch (const infeasible_error&) {
        // budget below this selection's floor; skip
      }
    }
    int k = 0;
    while (k < kk && ++state[k] == choices_per_device) state[k++] = 0;
    done = k == kk;
  }

  bool decoupled_ok = true;
  double decoupled = std::numeric_limits<double>::infinity();
  try {
    SelectionResult sel =
        brute_force_select(lib, inst.table, inst.scenario.qos);
    PowerSchedule sched = optimal_power_control(sel.selection, inst.scenario);
    decoupled = sched.total_latency_s;
  } catch (const infeasible_error&) {
    decoupled_ok = false;
  }

  rep.joint_latency_s = joint_best;
  rep.decoupled_latency_s = decoupled;
  if (!std::isfinite(joint_best) && !decoupled_ok) {
    rep.both_infeasible = true;
    rep.pass = true;
  } else if (std::isfinite(joint_best) && decoupled_ok) {
    rep.pass = std::abs(joint_best - decoupled) <= rel_tol * joint_best;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Experiment sweeps.
// ---------------------------------------------------------------------------

struct SweepRow {
  double axis_value = 0.0;
  std::string scheme;
  int trials = 0;  // trials that completed (infeasible ones are dropped)
  double mean_latency_s = 0.0;
  double std_latency_s = 0.0;
  double mean_energy_j = 0.0;
  double mean_blocks = 0.0;
  double qos_ok_rate = 0.0;
};

namespace detail {

inline ExperimentConfig at_axis_point(const ExperimentConfig& cfg,
                                      double value) {
  ExperimentConfig point = cfg;
  switch (cfg.sweep_axis) {
    case SweepAxis::Energy:
      point.energy_budget_j = value;
      break;
    case SweepAxis::Devices:
      point.devices = static_cast<int>(value);
      // Paper-style instances tie the library size to the device count.
      point.models = cfg.models == cfg.devices
                         ? point.devices
                         : std::max(cfg.models, point.devices);
      break;
    case SweepAxis::Rho:
      point.rho = value;
      break;
  }
  return point;
}

inline SweepRow aggregate(double axis_value, const std::string& scheme,
                          const std::vector<TrialResult>& results) {
  SweepRow row;
  row.axis_value = axis_value;
  row.scheme = scheme;
  row.trials = static_cast<int>(results.size());
  if (results.empty()) return row;
  double n = static_cast<double>(results.size());
  for (const auto& r : results) {
    row.mean_latency_s += r.total_latency_s / n;
    row.mean_energy_j += r.energy_used_j / n;
    row.mean_blocks += r.blocks / n;
    row.qos_ok_rate += (r.qos_ok ? 1.0 : 0.0) / n;
  }
  if (results.size() > 1) {
    double ss = 0.0;
    for (const auto& r : results) {
      double d = r.total_latency_s - row.mean_latency_s;
      ss += d * d;
    }
    row.std_latency_s = std::sqrt(ss / (n - 1.0));
  }
  return row;
}

}  // namespace detail

/// Grid run over the configured axis: per grid point, averages each scheme
/// over `trials` derived seeds. Per-trial infeasibilities become missing
/// points rather than aborts.
inline std::vector<SweepRow> sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<SweepRow> rows;
  for (double value : cfg.sweep_grid) {
    ExperimentConfig point = detail::at_axis_point(cfg, value);
    std::vector<TrialResult> mba, constant, unicast;
    for (int t = 0; t < cfg.trials; ++t) {
      // Trial seeds are shared across grid points (common random numbers).
      std::uint64_t trial_seed = Rng::derive(cfg.seed, t);
      try {
        mba.push_back(run_mba(point, trial_seed));
      } catch (const infeasible_error&) {
      }
      try {
        constant.push_back(run_constant_power_mba(point, trial_seed));
      } catch (const infeasible_error&) {
      }
      try {
        unicast.push_back(run_unicast(point, trial_seed));
      } catch (const infeasible_error&) {
      }
    }
    rows.push_back(detail::aggregate(value, "mba", mba));
    rows.push_back(detail::aggregate(value, "constant_power", constant));
    rows.push_back(detail::aggregate(value, "unicast", unicast));
  }
  return rows;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "axis_value,scheme,trials,mean_latency_s,std_latency_s,mean_energy_j,"
      "mean_blocks,qos_ok_rate\n";
  for (const auto& r : rows) {
    out += format_number(r.axis_value) + "," + r.scheme + "," +
           std::to_string(r.trials) + "," + format_number(r.mean_latency_s) +
           "," + format_number(r.std_latency_s) + "," +
           format_number(r.mean_energy_j) + "," +
           format_number(r.mean_blocks) + "," +
           format_number(r.qos_ok_rate) + "\n";
  }
  return out;
}

}  // namespace mba
