#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "mba/core.hpp"
#include "mba/lp.hpp"

namespace mba {

/// One knowledge-reuse model in a task's candidate set: a source model per
/// position plus its assembled score for the owning task.
struct CandidateModel {
  std::vector<int> blocks;  // blocks[n] = source model index
  double score = 0.0;
};

struct SelectionOptions {
  // Candidate construction replaces the seed's highest-scoring blocks first;
  // the ascending variant is kept for sensitivity studies.
  bool ascending_replacement = false;
  std::vector<int> device_order;  // empty = ascending task index
};

inline double candidate_score(const std::vector<int>& blocks,
                              const ScoreTable& table, int task) {
  double s = 0.0;
  for (int n = 0; n < static_cast<int>(blocks.size()); ++n)
    s += table(blocks[n], n, task);
  return s;
}

/// Candidate model set C_k: the task-specific seed followed by single-block
/// swaps, stopping at the first candidate that violates the QoS threshold.
inline std::vector<CandidateModel> build_candidate_set(
    int task, const Library& lib, const ScoreTable& table, double qos,
    const SelectionOptions& opt = {}) {
  const int own = lib.task_model[task];
  const int np = lib.positions;

  CandidateModel seed;
  seed.blocks.resize(np);
  for (int n = 0; n < np; ++n) seed.blocks[n] = own;
  seed.score = candidate_score(seed.blocks, table, task);
  if (seed.score < qos - 1e-12)
    throw infeasible_error("task " + std::to_string(task) +
                           ": task-specific model score " +
                           std::to_string(seed.score) +
                           " is below its QoS threshold " +
                           std::to_string(qos));

  // Seed positions ranked by own-block reusability score (ties: lower
  // position); rank r is the position swapped when building candidate r + 2.
  std::vector<int> ranked(np);
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    double sa = table(own, a, task), sb = table(own, b, task);
    return opt.ascending_replacement ? sa < sb : sa > sb;
  });

  std::vector<CandidateModel> set{seed};
  CandidateModel cur = seed;
  for (int r = 0; r < np; ++r) {
    const int pos = ranked[r];
    int repl = -1;
    double best = -1.0;
    for (int i = 0; i < lib.models; ++i) {
      if (i == own) continue;
      double s = table(i, pos, task);
      if (s > best) {
        best = s;
        repl = i;
      }
    }
    if (repl < 0) break;  // single-model library, nothing to swap in
    cur.blocks[pos] = repl;
    cur.score = candidate_score(cur.blocks, table, task);
    if (cur.score < qos - 1e-12) break;
    set.push_back(cur);
  }
  return set;
}

/// Number of blocks the candidate adds on top of the already-selected union.
inline int distance(const CandidateModel& cand,
                    const std::vector<std::uint8_t>& union_blocks,
                    int positions) {
  int d = 0;
  for (int n = 0; n < static_cast<int>(cand.blocks.size()); ++n)
    if (!union_blocks[static_cast<std::size_t>(cand.blocks[n]) * positions + n])
      ++d;
  return d;
}

/// Total block overlap between the candidate and every candidate in the
/// still-unprocessed sets.
inline int reappearance(const CandidateModel& cand,
                        const std::vector<std::vector<CandidateModel>>& sets,
                        const std::vector<int>& order, int next) {
  int u = 0;
  for (std::size_t o = next; o < order.size(); ++o)
    for (const auto& other : sets[order[o]])
      for (int n = 0; n < static_cast<int>(cand.blocks.size()); ++n)
        if (cand.blocks[n] == other.blocks[n]) ++u;
  return u;
}

struct SelectionResult {
  SelectionMatrix selection;
  int objective = 0;  // number of broadcast blocks
};

/// Greedy parameter selection: per task, picks the candidate minimizing the
/// distance/reappearance ratio (ties: smaller distance, then smaller index).
inline SelectionResult greedy_select(const Library& lib,
                                     const ScoreTable& table,
                                     const std::vector<double>& qos,
                                     const SelectionOptions& opt = {}) {
  const int kk = static_cast<int>(qos.size());
  std::vector<std::vector<CandidateModel>> sets(kk);
  for (int k = 0; k < kk; ++k)
    sets[k] = build_candidate_set(k, lib, table, qos[k], opt);

  std::vector<int> order = opt.device_order;
  if (order.empty()) {
    order.resize(kk);
    std::iota(order.begin(), order.end(), 0);
  }

  SelectionResult res{SelectionMatrix(lib.models, lib.positions, kk), 0};
  std::vector<std::uint8_t> unioned(
      static_cast<std::size_t>(lib.models) * lib.positions, 0);

  for (std::size_t o = 0; o < order.size(); ++o) {
    const int k = order[o];
    int best_idx = -1, best_d = 0;
    double best_metric = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sets[k].size(); ++c) {
      int d = distance(sets[k][c], unioned, lib.positions);
      int u = reappearance(sets[k][c], sets, order, static_cast<int>(o) + 1);
      double metric = static_cast<double>(d) / (u == 0 ? 1 : u);
      if (metric < best_metric - 1e-12 ||
          (metric < best_metric + 1e-12 &&
           (best_idx < 0 || d < best_d))) {
        best_metric = metric;
        best_idx = static_cast<int>(c);
        best_d = d;
      }
    }
    const auto& chosen = sets[k][best_idx];
    for (int n = 0; n < lib.positions; ++n) {
      res.selection.set_device(chosen.blocks[n], n, k, true);
      unioned[static_cast<std::size_t>(chosen.blocks[n]) * lib.positions + n] = 1;
    }
  }
  res.selection.rebuild_broadcast();
  res.objective = res.selection.broadcast_count();
  return res;
}

// ---------------------------------------------------------------------------
// Branch-and-bound over the compact pruned tree.
// Variable tiers follow the (k, n, i) order; device variable index
// (k*N + n)*M + i doubles as the tier index. Broadcast variables live after
// all device variables: K*N*M + i*N + n.
// ---------------------------------------------------------------------------

inline int device_var(int k, int n, int i, const Library& lib) {
  return (k * lib.positions + n) * lib.models + i;
}
inline int broadcast_var(int i, int n, const Library& lib, int devices) {
  return devices * lib.positions * lib.models + i * lib.positions + n;
}

/// A tree node: the first `depth` device variables are fixed to `fixed`.
struct BnBNode {
  int depth = 0;
  std::vector<std::uint8_t> fixed;
  double bound = 0.0;
};

/// Integer-relaxed restriction of the selection program at a node. Fixed
/// variables enter as
/// pinned bounds; the one-hot structure keeps every free indicator in [0,1].
inline LinearProgram relaxed_lp(const BnBNode& node, const Library& lib,
                                const ScoreTable& table,
                                const std::vector<double>& qos) {
  const int m = lib.models, np = lib.positions,
            kk = static_cast<int>(qos.size());
  const double inf = std::numeric_limits<double>::infinity();
  LinearProgram lp;

  for (int k = 0; k < kk; ++k)
    for (int n = 0; n < np; ++n)
      for (int i = 0; i < m; ++i) {
        int v = device_var(k, n, i, lib);
        if (v < node.depth) {
          double val = node.fixed[v] ? 1.0 : 0.0;
          lp.add_variable(0.0, val, val);
        } else {
          lp.add_variable(0.0, 0.0, inf);  // <= 1 implied by the one-hot row
        }
      }
  for (int i = 0; i < m; ++i)
    for (int n = 0; n < np; ++n) lp.add_variable(1.0, 0.0, inf);

  for (int k = 0; k < kk; ++k)
    for (int n = 0; n < np; ++n) {
      std::vector<std::pair<int, double>> row;
      for (int i = 0; i < m; ++i) row.push_back({device_var(k, n, i, lib), 1.0});
      lp.add_row(std::move(row), '=', 1.0);
    }
  for (int k = 0; k < kk; ++k) {
    std::vector<std::pair<int, double>> row;
    for (int n = 0; n < np; ++n)
      for (int i = 0; i < m; ++i)
        row.push_back({device_var(k, n, i, lib), table(i, n, k)});
    lp.add_row(std::move(row), '>', qos[k]);
  }
  for (int i = 0; i < m; ++i)
    for (int n = 0; n < np; ++n)
      for (int k = 0; k < kk; ++k)
        lp.add_row({{device_var(k, n, i, lib), 1.0},
                    {broadcast_var(i, n, lib, kk), -1.0}},
                   '<', 0.0);
  return lp;
}

struct BnBResult {
  SelectionMatrix selection;
  int objective = 0;
  double root_bound = 0.0;
  long nodes_visited = 0;
};

namespace detail {

inline bool lp_point_integral(const std::vector<double>& x, int count,
                              double tol) {
  for (int v = 0; v < count; ++v) {
    double f = x[v] - std::floor(x[v]);
    if (std::min(f, 1.0 - f) > tol) return false;
  }
  return true;
}

// Rounds a (near-)integral LP point into a SelectionMatrix and re-verifies
// the one-hot and QoS constraints.
inline bool incumbent_from_point(const std::vector<double>& x,
                                 const Library& lib, const ScoreTable& table,
                                 const std::vector<double>& qos,
                                 SelectionMatrix& out) {
  const int kk = static_cast<int>(qos.size());
  SelectionMatrix sel(lib.models, lib.positions, kk);
  for (int k = 0; k < kk; ++k)
    for (int n = 0; n < lib.positions; ++n) {
      int count = 0;
      for (int i = 0; i < lib.models; ++i)
        if (x[device_var(k, n, i, lib)] > 0.5) {
          sel.set_device(i, n, k, true);
          ++count;
        }
      if (count != 1) return false;
    }
  for (int k = 0; k < kk; ++k) {
    double score = 0.0;
    for (int n = 0; n < lib.positions; ++n)
      for (int i = 0; i < lib.models; ++i)
        if (sel.device(i, n, k)) score += table(i, n, k);
    if (score < qos[k] - 1e-9) return false;
  }
  sel.rebuild_broadcast();
  out = std::move(sel);
  return true;
}

}  // namespace detail

/// Optimal parameter selection: best-first B&B (depth-first tie-breaking)
/// with LP-relaxation fathoming and one-hot pruning of the variable tree.
inline BnBResult bnb_select(const Library& lib, const ScoreTable& table,
                            const std::vector<double>& qos,
                            const SelectionOptions& opt = {}) {
  const int m = lib.models, np = lib.positions,
            kk = static_cast<int>(qos.size());
  const int total_vars = kk * np * m;
  const double int_tol = 1e-6;

  BnBResult res;
  int incumbent = std::numeric_limits<int>::max();
  bool have_incumbent = false;

  // A feasible greedy solution is a free upper bound; it only tightens the
  // bound-dominance fathoming and never changes the returned optimum.
  try {
    SelectionResult g = greedy_select(lib, table, qos, opt);
    incumbent = g.objective;
    res.selection = std::move(g.selection);
    have_incumbent = true;
  } catch (const infeasible_error&) {
    // greedy needs the task-specific seed to qualify; the selection program
    // may still be feasible with a different assembly, so keep searching
  }

  struct QueueEntry {
    double bound;
    int depth;
    long seq;
    std::vector<std::uint8_t> fixed;
    bool operator<(const QueueEntry& other) const {
      if (bound != other.bound) return bound > other.bound;  // min-heap
      if (depth != other.depth) return depth < other.depth;  // deeper first
      return seq > other.seq;
    }
  };
  std::priority_queue<QueueEntry> open;
  long seq = 0;
  open.push({0.0, 0, seq++, {}});

  bool root_solved = false;
  while (!open.empty()) {
    QueueEntry entry = open.top();
    open.pop();
    // Bound-dominance fathoming; integral objectives allow the ceil cut.
    if (have_incumbent && entry.bound >= incumbent - 1 + 1e-6) continue;

    BnBNode node{entry.depth, std::move(entry.fixed), 0.0};
    ++res.nodes_visited;
    LpSolution sol = solve_lp(relaxed_lp(node, lib, table, qos));
    if (!root_solved) {
      if (sol.status == LpStatus::Optimal) res.root_bound = sol.value;
      root_solved = true;
    }
    if (sol.status != LpStatus::Optimal) continue;  // (a) infeasible
    node.bound = sol.value;
    if (have_incumbent && node.bound >= incumbent - 1 + 1e-6) continue;  // (b)

    if (detail::lp_point_integral(sol.x, total_vars, int_tol)) {  // (c)
      SelectionMatrix cand;
      if (detail::incumbent_from_point(sol.x, lib, table, qos, cand)) {
        int obj = cand.broadcast_count();
        if (!have_incumbent || obj < incumbent) {
          incumbent = obj;
          res.selection = std::move(cand);
          have_incumbent = true;
        }
        continue;
      }
    }

    if (node.depth >= total_vars) continue;
    // Branch on the next tier, honoring the one-hot pruning rule.
    const int i = node.depth % m;
    const int group_start = node.depth - i;
    bool group_has_one = false;
    for (int v = group_start; v < node.depth; ++v)
      group_has_one = group_has_one || node.fixed[v];

    auto push_child = [&](std::uint8_t value) {
      QueueEntry child{node.bound, node.depth + 1, seq++, node.fixed};
      child.fixed.push_back(value);
      open.push(std::move(child));
    };
    if (!group_has_one) push_child(1);
    if (group_has_one || i < m - 1) push_child(0);
  }

  if (!have_incumbent)
    throw infeasible_error(
        "selection infeasible: no one-hot assignment meets every QoS "
        "threshold");
  res.objective = incumbent;
  return res;
}

// ---------------------------------------------------------------------------
// Exhaustive oracles.
// ---------------------------------------------------------------------------

namespace detail {

// Enumerates each device's feasible one-block-per-position assignments.
inline std::vector<std::vector<std::vector<int>>> feasible_assignments(
    const Library& lib, const ScoreTable& table,
    const std::vector<double>& qos) {
  const int kk = static_cast<int>(qos.size());
  std::vector<std::vector<std::vector<int>>> out(kk);
  std::vector<int> blocks(lib.positions, 0);
  for (int k = 0; k < kk; ++k) {
    while (true) {
      if (candidate_score(blocks, table, k) >= qos[k] - 1e-12)
        out[k].push_back(blocks);
      int n = 0;
      while (n < lib.positions && ++blocks[n] == lib.models) blocks[n++] = 0;
      if (n == lib.positions) break;
    }
    if (out[k].empty())
      throw infeasible_error("device " + std::to_string(k) +
                             " cannot meet its QoS threshold with any "
                             "one-block-per-position assembly");
  }
  return out;
}

inline void check_brute_force_capacity(const Library& lib, int devices) {
  double combos =
      std::pow(static_cast<double>(lib.models),
               static_cast<double>(lib.positions) * devices);
  if (!(combos <= 1e7))
    throw capacity_error("brute_force_select: M^(N*K) exceeds 1e7");
}

}  // namespace detail

/// Exhaustive minimum-broadcast search; the independence oracle for both
/// selection algorithms. Guarded at 1e7 assignments.
inline SelectionResult brute_force_select(const Library& lib,
                                          const ScoreTable& table,
                                          const std::vector<double>& qos) {
  detail::check_brute_force_capacity(lib, static_cast<int>(qos.size()));
  const int kk = static_cast<int>(qos.size());
  auto feasible = detail::feasible_assignments(lib, table, qos);

  std::vector<std::uint8_t> unioned(
      static_cast<std::size_t>(lib.models) * lib.positions, 0);
  std::vector<int> choice(kk, -1);
  std::vector<int> best_choice;
  int best = std::numeric_limits<int>::max();

  auto recurse = [&](auto&& self, int k, int count) -> void {
    if (count >= best) return;
    if (k == kk) {
      best = count;
      best_choice = choice;
      return;
    }
    for (std::size_t c = 0; c < feasible[k].size(); ++c) {
      const auto& blocks = feasible[k][c];
      std::vector<int> added;
      for (int n = 0; n < lib.positions; ++n) {
        auto idx = static_cast<std::size_t>(blocks[n]) * lib.positions + n;
        if (!unioned[idx]) {
          unioned[idx] = 1;
          added.push_back(static_cast<int>(idx));
        }
      }
      choice[k] = static_cast<int>(c);
      self(self, k + 1, count + static_cast<int>(added.size()));
      for (int idx : added) unioned[idx] = 0;
    }
  };
  recurse(recurse, 0, 0);

  SelectionResult res{SelectionMatrix(lib.models, lib.positions, kk), best};
  for (int k = 0; k < kk; ++k) {
    const auto& blocks = feasible[k][best_choice[k]];
    for (int n = 0; n < lib.positions; ++n)
      res.selection.set_device(blocks[n], n, k, true);
  }
  res.selection.rebuild_broadcast();
  return res;
}

/// Sequential-Z view: the smallest Z for which a Z-block broadcast
/// set satisfies every QoS threshold. Agrees with brute_force_select.
inline int min_broadcast_blocks_sequential(const Library& lib,
                                           const ScoreTable& table,
                                           const std::vector<double>& qos) {
  detail::check_brute_force_capacity(lib, static_cast<int>(qos.size()));
  const int kk = static_cast<int>(qos.size());
  auto feasible = detail::feasible_assignments(lib, table, qos);

  std::vector<std::uint8_t> unioned(
      static_cast<std::size_t>(lib.models) * lib.positions, 0);
  auto exists_within = [&](auto&& self, int k, int count, int z) -> bool {
    if (count > z) return false;
    if (k == kk) return true;
    for (const auto& blocks : feasible[k]) {
      std::vector<int> added;
      for (int n = 0; n < lib.positions; ++n) {
        auto idx = static_cast<std::size_t>(blocks[n]) * lib.positions + n;
        if (!unioned[idx]) {
          unioned[idx] = 1;
          added.push_back(static_cast<int>(idx));
        }
      }
      bool ok = self(self, k + 1, count + static_cast<int>(added.size()), z);
      for (int idx : added) unioned[idx] = 0;
      if (ok) return true;
    }
    return false;
  };
  for (int z = lib.positions; z <= lib.models * lib.positions; ++z)
    if (exists_within(exists_within, 0, 0, z)) return z;
  throw infeasible_error("sequential-Z search found no feasible broadcast set");
}

}  // namespace mba
