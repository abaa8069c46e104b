#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "mba/core.hpp"
#include "mba/rng.hpp"

namespace mba {

/// A pairwise synergy term: `weight` is added to a coalition's value for
/// `task` when both blocks are chosen in the assembled model.
struct Interaction {
  BlockId a, b;
  int task = 0;
  double weight = 0.0;
};

/// Coalition game over the M*N library blocks. The characteristic value of a
/// coalition for a task is the best per-position assembly it can form, with
/// per-position baseline fillers standing in for missing positions.
struct UtilityGame {
  int models = 0, positions = 0, tasks = 0;
  std::vector<double> quality;   // q[i][n][k], row-major like ScoreTable
  std::vector<double> baseline;  // baseline[n][k], filler quality per position
  std::vector<Interaction> interactions;

  int players() const { return models * positions; }
  int player(int i, int n) const { return i * positions + n; }
  int player_model(int p) const { return p / positions; }
  int player_position(int p) const { return p % positions; }

  double quality_at(int i, int n, int k) const {
    return quality[(static_cast<std::size_t>(i) * positions + n) * tasks + k];
  }
  double& quality_at(int i, int n, int k) {
    return quality[(static_cast<std::size_t>(i) * positions + n) * tasks + k];
  }
  double baseline_at(int n, int k) const {
    return baseline[static_cast<std::size_t>(n) * tasks + k];
  }
  double& baseline_at(int n, int k) {
    return baseline[static_cast<std::size_t>(n) * tasks + k];
  }

  static UtilityGame zeros(int models, int positions, int tasks) {
    UtilityGame g;
    g.models = models;
    g.positions = positions;
    g.tasks = tasks;
    g.quality.assign(static_cast<std::size_t>(models) * positions * tasks, 0.0);
    g.baseline.assign(static_cast<std::size_t>(positions) * tasks, 0.0);
    return g;
  }
};

namespace detail {

// Positions coupled by interaction terms for one task must be assembled
// jointly; everything else decomposes into independent per-position maxima.
struct TaskComponents {
  std::vector<std::vector<int>> joint;  // position groups touched by interactions
  std::vector<int> free_positions;
  std::vector<Interaction> task_interactions;
};

inline TaskComponents analyze_task(const UtilityGame& g, int task) {
  TaskComponents tc;
  std::vector<int> parent(g.positions);
  for (int n = 0; n < g.positions; ++n) parent[n] = n;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<char> touched(g.positions, 0);
  for (const auto& it : g.interactions) {
    if (it.task != task) continue;
    tc.task_interactions.push_back(it);
    touched[it.a.position] = touched[it.b.position] = 1;
    parent[find(it.a.position)] = find(it.b.position);
  }
  std::vector<std::vector<int>> groups(g.positions);
  for (int n = 0; n < g.positions; ++n) {
    if (touched[n])
      groups[find(n)].push_back(n);
    else
      tc.free_positions.push_back(n);
  }
  for (auto& grp : groups)
    if (!grp.empty()) tc.joint.push_back(std::move(grp));
  return tc;
}

// Best assembly value of one joint component: enumerate every per-position
// choice (member block or baseline filler) and add the synergies of co-chosen
// pairs. members[n] lists the coalition's model indices at position n.
inline double component_value(const UtilityGame& g, const TaskComponents& tc,
                              const std::vector<std::vector<int>>& members,
                              const std::vector<int>& group, int task) {
  std::vector<int> choice(group.size(), -1);  // -1 = baseline filler
  double best = 0.0;
  bool first = true;

  auto evaluate = [&]() {
    double v = 0.0;
    for (std::size_t gi = 0; gi < group.size(); ++gi) {
      int n = group[gi];
      v += choice[gi] < 0 ? g.baseline_at(n, task)
                          : g.quality_at(choice[gi], n, task);
    }
    for (const auto& it : tc.task_interactions) {
      auto pos_of = [&](int n) {
        for (std::size_t gi = 0; gi < group.size(); ++gi)
          if (group[gi] == n) return static_cast<int>(gi);
        return -1;
      };
      int ga = pos_of(it.a.position), gb = pos_of(it.b.position);
      if (ga < 0 || gb < 0) continue;
      if (choice[ga] == it.a.model && choice[gb] == it.b.model) v += it.weight;
    }
    if (first || v > best) best = v;
    first = false;
  };

  auto recurse = [&](auto&& self, std::size_t gi) -> void {
    if (gi == group.size()) {
      evaluate();
      return;
    }
    choice[gi] = -1;
    self(self, gi + 1);
    for (int i : members[group[gi]]) {
      choice[gi] = i;
      self(self, gi + 1);
    }
  };
  recurse(recurse, 0);
  return best;
}

inline double value_from_members(const UtilityGame& g,
                                 const TaskComponents& tc,
                                 const std::vector<std::vector<int>>& members,
                                 int task) {
  double v = 0.0;
  for (int n : tc.free_positions) {
    double best = g.baseline_at(n, task);
    for (int i : members[n]) best = std::max(best, g.quality_at(i, n, task));
    v += best;
  }
  for (const auto& group : tc.joint)
    v += component_value(g, tc, members, group, task);
  return v;
}

}  // namespace detail

/// Characteristic value v(S, k): the best assembly the coalition S can form
/// for task k, falling back to baseline fillers at uncovered positions.
inline double coalition_value(const UtilityGame& g,
                              const std::vector<std::uint8_t>& in_coalition,
                              int task) {
  auto tc = detail::analyze_task(g, task);
  std::vector<std::vector<int>> members(g.positions);
  for (int p = 0; p < g.players(); ++p)
    if (in_coalition[p])
      members[g.player_position(p)].push_back(g.player_model(p));
  return detail::value_from_members(g, tc, members, task);
}

/// Exact Shapley values of all M*N blocks for one task, by full coalition
/// enumeration. Capped at 20 players.
inline std::vector<double> exact_shapley(const UtilityGame& g, int task) {
  const int np = g.players();
  if (np > 20)
    throw capacity_error(
        "exact_shapley handles at most 20 players (2^n coalitions); use "
        "mc_shapley for larger games");
  const auto tc = detail::analyze_task(g, task);
  const std::uint32_t full = (np == 32) ? 0xffffffffu : ((1u << np) - 1u);

  std::vector<double> value(static_cast<std::size_t>(full) + 1);
  std::vector<std::vector<int>> members(g.positions);
  for (std::uint32_t mask = 0; mask <= full; ++mask) {
    for (auto& m : members) m.clear();
    for (int p = 0; p < np; ++p)
      if (mask & (1u << p))
        members[g.player_position(p)].push_back(g.player_model(p));
    value[mask] = detail::value_from_members(g, tc, members, task);
  }

  // weight(s) = s!(np-1-s)!/np! = 1 / (np * C(np-1, s))
  std::vector<double> weight(np);
  for (int s = 0; s < np; ++s) {
    double binom = 1.0;
    for (int j = 1; j <= s; ++j) binom = binom * (np - j) / j;
    weight[s] = 1.0 / (np * binom);
  }

  std::vector<double> phi(np, 0.0);
  for (std::uint32_t mask = 0; mask <= full; ++mask) {
    int size = std::popcount(mask);
    for (int p = 0; p < np; ++p) {
      if (mask & (1u << p)) continue;
      phi[p] += weight[size] * (value[mask | (1u << p)] - value[mask]);
    }
  }
  return phi;
}

/// Permutation-sampling Shapley estimate; unbiased per permutation and
/// deterministic given the seed.
inline std::vector<double> mc_shapley(const UtilityGame& g, int task,
                                      int permutations, std::uint64_t seed) {
  if (permutations < 1)
    throw std::domain_error("mc_shapley requires permutations >= 1");
  const int np = g.players();
  const auto tc = detail::analyze_task(g, task);

  // Map position -> joint component index, or -1 when independent.
  std::vector<int> comp_of(g.positions, -1);
  for (std::size_t c = 0; c < tc.joint.size(); ++c)
    for (int n : tc.joint[c]) comp_of[n] = static_cast<int>(c);

  std::vector<double> phi(np, 0.0);
  std::vector<int> order(np);
  for (int p = 0; p < np; ++p) order[p] = p;

  Rng rng(seed);
  std::vector<std::vector<int>> members(g.positions);
  std::vector<double> free_best(g.positions);
  std::vector<double> comp_val(tc.joint.size());

  for (int t = 0; t < permutations; ++t) {
    rng.shuffle(order);
    for (auto& m : members) m.clear();
    for (int n = 0; n < g.positions; ++n) free_best[n] = g.baseline_at(n, task);
    for (std::size_t c = 0; c < tc.joint.size(); ++c)
      comp_val[c] = detail::component_value(g, tc, members, tc.joint[c], task);

    for (int p : order) {
      const int n = g.player_position(p);
      const int i = g.player_model(p);
      double marginal;
      if (comp_of[n] < 0) {
        double q = g.quality_at(i, n, task);
        marginal = std::max(0.0, q - free_best[n]);
        free_best[n] = std::max(free_best[n], q);
        members[n].push_back(i);
      } else {
        members[n].push_back(i);
        double after = detail::component_value(g, tc, members,
                                               tc.joint[comp_of[n]], task);
        marginal = after - comp_val[comp_of[n]];
        comp_val[comp_of[n]] = after;
      }
      phi[p] += marginal;
    }
  }
  for (double& v : phi) v /= permutations;
  return phi;
}

struct ShapleyOptions {
  int exact_player_limit = 20;  // above this, fall back to Monte Carlo
  int permutations = 200;
  std::uint64_t seed = 1;
};

struct ScoreTableBuild {
  ScoreTable table;
  std::vector<double> raw;  // unclamped Shapley values, same layout as table
};

/// Builds the reusability-score table: per-task Shapley values, clamped at 0
/// and normalized so each task-specific model totals exactly 1.
inline ScoreTableBuild build_score_table(const UtilityGame& g,
                                         const Library& lib,
                                         const ShapleyOptions& opt = {}) {
  if (g.models != lib.models || g.positions != lib.positions ||
      g.tasks != lib.tasks())
    throw config_error("utility game dimensions do not match library");
  ScoreTableBuild out;
  out.table = ScoreTable(g.models, g.positions, g.tasks);
  out.raw.assign(out.table.raw().size(), 0.0);

  for (int k = 0; k < g.tasks; ++k) {
    std::vector<double> phi =
        g.players() <= opt.exact_player_limit
            ? exact_shapley(g, k)
            : mc_shapley(g, k, opt.permutations, Rng::derive(opt.seed, k));

    const int own = lib.task_model[k];
    double own_total = 0.0;
    for (int n = 0; n < g.positions; ++n)
      own_total += std::max(phi[g.player(own, n)], 0.0);
    if (!(own_total > 0.0))
      throw infeasible_error("degenerate game: task " + std::to_string(k) +
                             " has a nonpositive task-specific model score");

    for (int p = 0; p < g.players(); ++p) {
      int i = g.player_model(p), n = g.player_position(p);
      std::size_t idx =
          (static_cast<std::size_t>(i) * g.positions + n) * g.tasks + k;
      out.raw[idx] = phi[p];
      out.table(i, n, k) = std::max(phi[p], 0.0) / own_total;
    }
  }
  return out;
}

/// QoS thresholds c_k = rho * I_k^{(k)}; equals rho on a normalized table.
inline std::vector<double> qos_thresholds(const ScoreTable& table,
                                          const Library& lib, double rho) {
  if (!(rho > 0.0) || !(rho <= 1.0))
    throw std::domain_error("rho must lie in (0, 1]");
  std::vector<double> c(lib.tasks());
  for (int k = 0; k < lib.tasks(); ++k)
    c[k] = rho * table.model_score(lib.task_model[k], k);
  return c;
}

/// Config for synthetic utility games (qualities, cross-task affinity,
/// optional pairwise synergies).
struct GameConfig {
  double base_low = 0.2, base_high = 1.0;    // intrinsic block quality
  double reuse_low = 0.9, reuse_high = 0.99; // cross-task affinity range
  double cross_jitter = 0.96;                // per-entry jitter floor on cross blocks
  double baseline = 0.0;                     // filler quality per position
  double interaction_count = 0.0;            // expected number of synergy terms
  double interaction_low = 0.0, interaction_high = 0.1;
};

/// Seeded synthetic game: own-task blocks keep their full intrinsic quality,
/// cross-task quality is scaled down by a per-(model, task) affinity.
inline UtilityGame random_game(const Library& lib, const GameConfig& cfg,
                               std::uint64_t seed) {
  UtilityGame g = UtilityGame::zeros(lib.models, lib.positions, lib.tasks());
  Rng rng(seed);

  std::vector<double> intrinsic(static_cast<std::size_t>(lib.models) *
                                lib.positions);
  for (auto& v : intrinsic) v = rng.uniform(cfg.base_low, cfg.base_high);

  std::vector<double> affinity(static_cast<std::size_t>(lib.models) *
                               lib.tasks());
  for (auto& v : affinity) v = rng.uniform(cfg.reuse_low, cfg.reuse_high);

  for (int i = 0; i < lib.models; ++i)
    for (int n = 0; n < lib.positions; ++n)
      for (int k = 0; k < lib.tasks(); ++k) {
        double q = intrinsic[static_cast<std::size_t>(i) * lib.positions + n];
        if (i != lib.task_model[k])
          q *= affinity[static_cast<std::size_t>(i) * lib.tasks() + k] *
               rng.uniform(cfg.cross_jitter, 1.0);
        g.quality_at(i, n, k) = q;
      }

  for (int n = 0; n < lib.positions; ++n)
    for (int k = 0; k < lib.tasks(); ++k) g.baseline_at(n, k) = cfg.baseline;

  int terms = static_cast<int>(cfg.interaction_count);
  for (int t = 0; t < terms; ++t) {
    if (lib.positions < 2) break;
    Interaction it;
    int na = static_cast<int>(rng.below(lib.positions));
    int nb;
    do {
      nb = static_cast<int>(rng.below(lib.positions));
    } while (nb == na);
    it.a = {static_cast<int>(rng.below(lib.models)), na};
    it.b = {static_cast<int>(rng.below(lib.models)), nb};
    it.task = static_cast<int>(rng.below(lib.tasks()));
    it.weight = rng.uniform(cfg.interaction_low, cfg.interaction_high);
    g.interactions.push_back(it);
  }
  return g;
}

}  // namespace mba
