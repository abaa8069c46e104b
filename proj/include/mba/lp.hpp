#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mba/core.hpp"

namespace mba {

enum class LpStatus { Optimal, Infeasible, Unbounded };

/// Minimization LP in row form with per-variable bounds. Relations are
/// '<' (<=), '=' and '>' (>=). Lower bounds must be finite; an upper bound of
/// +infinity means unbounded above.
struct LinearProgram {
  struct Row {
    std::vector<std::pair<int, double>> terms;  // (variable, coefficient)
    char rel = '<';
    double rhs = 0.0;
  };

  std::vector<double> objective;
  double objective_constant = 0.0;
  std::vector<double> lower, upper;
  std::vector<Row> rows;

  int add_variable(double cost, double lo, double hi) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    return static_cast<int>(objective.size()) - 1;
  }

  void add_row(std::vector<std::pair<int, double>> terms, char rel,
               double rhs) {
    for (auto& [var, coeff] : terms)
      if (var < 0 || var >= static_cast<int>(objective.size()))
        throw config_error("LP row references an undefined variable");
    if (rel != '<' && rel != '=' && rel != '>')
      throw config_error("LP relation must be one of <, =, >");
    rows.push_back({std::move(terms), rel, rhs});
  }

  int num_vars() const { return static_cast<int>(objective.size()); }
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  double dual_value = 0.0;  // y'b certificate; equals value at optimum
  std::vector<double> x;
  int iterations = 0;
};

namespace detail {

constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-8;

// Dense tableau for the two-phase simplex.
struct Tableau {
  int rows = 0, cols = 0;           // structural rows, total columns (no rhs)
  std::vector<double> a;            // (rows) x (cols + 1), last col = rhs
  std::vector<double> z;            // cost row, cols + 1 entries
  std::vector<int> basis;           // basic variable per row
  std::vector<char> blocked;       // columns barred from entering

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * (cols + 1) + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * (cols + 1) + c]; }
  double& rhs(int r) { return at(r, cols); }

  void pivot(int pr, int pc) {
    double piv = at(pr, pc);
    double inv = 1.0 / piv;
    for (int c = 0; c <= cols; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (int r = 0; r < rows; ++r) {
      if (r == pr) continue;
      double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c <= cols; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
    double f = z[pc];
    if (f != 0.0) {
      for (int c = 0; c <= cols; ++c) z[c] -= f * at(pr, c);
      z[pc] = 0.0;
    }
    basis[pr] = pc;
  }

  // Returns Optimal/Unbounded; `iters` accumulates pivot count.
  LpStatus iterate(int& iters, int iter_cap) {
    int stall = 0;
    double last_obj = z[cols];
    while (true) {
      // Dantzig rule, switching to Bland on stalls to break cycles.
      bool bland = stall > rows + cols;
      int pc = -1;
      double best = -kPivotTol;
      for (int c = 0; c < cols; ++c) {
        if (blocked[c]) continue;
        if (z[c] < best) {
          pc = c;
          if (bland) break;
          best = z[c];
        }
      }
      if (pc < 0) return LpStatus::Optimal;

      int pr = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int r = 0; r < rows; ++r) {
        double arc = at(r, pc);
        if (arc <= kPivotTol) continue;
        double ratio = rhs(r) / arc;
        if (ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 &&
             (pr < 0 || basis[r] < basis[pr]))) {
          best_ratio = ratio;
          pr = r;
        }
      }
      if (pr < 0) return LpStatus::Unbounded;
      pivot(pr, pc);
      if (++iters > iter_cap)
        throw solver_error("simplex iteration cap exceeded");
      double obj = z[cols];
      if (obj > last_obj - 1e-12)
        ++stall;
      else
        stall = 0;
      last_obj = obj;
    }
  }
};

}  // namespace detail

/// Two-phase dense simplex. Lower bounds are shifted out, finite upper bounds
/// become explicit rows, fixed variables (lo == hi) are substituted.
inline LpSolution solve_lp(const LinearProgram& lp) {
  const int n = lp.num_vars();
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(lp.lower[j]))
      throw config_error("solve_lp requires finite lower bounds");
    if (lp.upper[j] < lp.lower[j])
      throw config_error("variable with upper < lower bound");
  }

  // Map to free variables; substitute fixed ones.
  std::vector<int> var_id(n, -1);
  int nf = 0;
  for (int j = 0; j < n; ++j)
    if (lp.upper[j] > lp.lower[j]) var_id[j] = nf++;

  double obj_shift = lp.objective_constant;
  for (int j = 0; j < n; ++j) obj_shift += lp.objective[j] * lp.lower[j];

  struct StdRow {
    std::vector<double> coeff;
    char rel;
    double rhs;
    int orig = -1;  // index into lp.rows, -1 for bound rows
    double sign = 1.0;
  };
  std::vector<StdRow> srows;
  for (std::size_t r = 0; r < lp.rows.size(); ++r) {
    const auto& row = lp.rows[r];
    StdRow s{std::vector<double>(nf, 0.0), row.rel, row.rhs,
             static_cast<int>(r), 1.0};
    for (auto [var, coeff] : row.terms) {
      s.rhs -= coeff * lp.lower[var];
      if (var_id[var] >= 0) s.coeff[var_id[var]] += coeff;
    }
    bool all_zero =
        std::all_of(s.coeff.begin(), s.coeff.end(),
                    [](double v) { return std::abs(v) < 1e-14; });
    if (all_zero) {
      bool ok = (s.rel == '<' && s.rhs >= -detail::kFeasTol) ||
                (s.rel == '>' && s.rhs <= detail::kFeasTol) ||
                (s.rel == '=' && std::abs(s.rhs) <= detail::kFeasTol);
      if (!ok) return {LpStatus::Infeasible, 0.0, 0.0, {}, 0};
      continue;
    }
    srows.push_back(std::move(s));
  }
  for (int j = 0; j < n; ++j) {
    if (var_id[j] < 0 || !std::isfinite(lp.upper[j])) continue;
    StdRow s{std::vector<double>(nf, 0.0), '<', lp.upper[j] - lp.lower[j], -1,
             1.0};
    s.coeff[var_id[j]] = 1.0;
    srows.push_back(std::move(s));
  }

  const int m = static_cast<int>(srows.size());
  // Flip rows to nonnegative rhs.
  for (auto& s : srows) {
    if (s.rhs < 0.0) {
      for (double& c : s.coeff) c = -c;
      s.rhs = -s.rhs;
      s.sign = -1.0;
      if (s.rel == '<')
        s.rel = '>';
      else if (s.rel == '>')
        s.rel = '<';
    }
  }

  // Column layout: [structural nf][slack/surplus][artificial]; every row gets
  // a +e_r column (slack for '<', artificial otherwise) used for duals.
  int n_slack = 0, n_art = 0;
  for (const auto& s : srows) {
    if (s.rel == '<') ++n_slack;
    if (s.rel == '>') ++n_slack;
    if (s.rel != '<') ++n_art;
  }
  detail::Tableau t;
  t.rows = m;
  t.cols = nf + n_slack + n_art;
  t.a.assign(static_cast<std::size_t>(m) * (t.cols + 1), 0.0);
  t.z.assign(t.cols + 1, 0.0);
  t.basis.assign(m, -1);
  t.blocked.assign(t.cols, 0);

  std::vector<int> unit_col(m, -1);  // +e_r column per row, for dual recovery
  int slack_at = nf, art_at = nf + n_slack;
  for (int r = 0; r < m; ++r) {
    const auto& s = srows[r];
    for (int j = 0; j < nf; ++j) t.at(r, j) = s.coeff[j];
    t.rhs(r) = s.rhs;
    if (s.rel == '<') {
      t.at(r, slack_at) = 1.0;
      unit_col[r] = slack_at;
      t.basis[r] = slack_at++;
    } else {
      if (s.rel == '>') t.at(r, slack_at++) = -1.0;
      t.at(r, art_at) = 1.0;
      unit_col[r] = art_at;
      t.basis[r] = art_at++;
    }
  }

  const int iter_cap = 200 * (m + t.cols) + 2000;
  int iters = 0;

  // Phase 1: minimize the artificial sum.
  bool have_art = n_art > 0;
  if (have_art) {
    // Unit cost on every artificial column, then price out the basic ones.
    for (int c = nf + n_slack; c < t.cols; ++c) t.z[c] = 1.0;
    for (int r = 0; r < m; ++r) {
      if (t.basis[r] < nf + n_slack) continue;
      for (int c = 0; c <= t.cols; ++c) t.z[c] -= t.at(r, c);
    }
    LpStatus st = t.iterate(iters, iter_cap);
    if (st == LpStatus::Unbounded)
      throw solver_error("phase-1 unbounded: internal error");
    if (-t.z[t.cols] > 1e-7)
      return {LpStatus::Infeasible, 0.0, 0.0, {}, iters};
    // Drive remaining artificials out of the basis where possible.
    for (int r = 0; r < m; ++r) {
      if (t.basis[r] < nf + n_slack) continue;
      int pc = -1;
      for (int c = 0; c < nf + n_slack; ++c)
        if (std::abs(t.at(r, c)) > detail::kPivotTol) {
          pc = c;
          break;
        }
      if (pc >= 0) t.pivot(r, pc);
    }
    for (int c = nf + n_slack; c < t.cols; ++c) t.blocked[c] = 1;
  }

  // Phase 2: original objective.
  std::fill(t.z.begin(), t.z.end(), 0.0);
  std::vector<double> cost(t.cols, 0.0);
  for (int j = 0; j < n; ++j)
    if (var_id[j] >= 0) cost[var_id[j]] = lp.objective[j];
  for (int c = 0; c < t.cols; ++c) t.z[c] = cost[c];
  for (int r = 0; r < m; ++r) {
    double cb = cost[t.basis[r]];
    if (cb == 0.0) continue;
    for (int c = 0; c <= t.cols; ++c) t.z[c] -= cb * t.at(r, c);
  }
  LpStatus st = t.iterate(iters, iter_cap);
  if (st == LpStatus::Unbounded)
    return {LpStatus::Unbounded, 0.0, 0.0, {}, iters};

  LpSolution sol;
  sol.status = LpStatus::Optimal;
  sol.iterations = iters;
  sol.x.assign(n, 0.0);
  std::vector<double> xf(t.cols, 0.0);
  for (int r = 0; r < m; ++r) xf[t.basis[r]] = t.rhs(r);
  for (int j = 0; j < n; ++j)
    sol.x[j] = lp.lower[j] + (var_id[j] >= 0 ? xf[var_id[j]] : 0.0);
  sol.value = obj_shift;
  for (int j = 0; j < n; ++j)
    sol.value += lp.objective[j] * (sol.x[j] - lp.lower[j]);

  // Dual certificate from reduced costs of the unit columns: y_r = -z[e_r].
  double dual = obj_shift;
  for (int r = 0; r < m; ++r) dual += -t.z[unit_col[r]] * srows[r].rhs;
  sol.dual_value = dual;
  return sol;
}

/// Rounding check for the selection root relaxation: naive
/// relaxation-plus-rounding can violate the one-hot or QoS constraints, so
/// the rounded point is re-verified.
///
/// Variable layout shared with mba::selection: device vars x[(k*N + n)*M + i]
/// first, then broadcast vars x[K*N*M + i*N + n].
struct RoundingReport {
  bool ok = false;
  SelectionMatrix selection;
  std::vector<std::string> violations;
};

inline RoundingReport round_and_check(const std::vector<double>& primal,
                                      const Library& lib,
                                      const ScoreTable& table,
                                      const std::vector<double>& qos) {
  const int m = lib.models, np = lib.positions,
            kk = static_cast<int>(qos.size());
  if (static_cast<int>(primal.size()) < kk * np * m)
    throw config_error("primal vector too short for instance dimensions");
  RoundingReport rep;
  rep.selection = SelectionMatrix(m, np, kk);
  for (int k = 0; k < kk; ++k)
    for (int n = 0; n < np; ++n)
      for (int i = 0; i < m; ++i) {
        double v = primal[(static_cast<std::size_t>(k) * np + n) * m + i];
        if (v >= 0.5) rep.selection.set_device(i, n, k, true);
      }
  rep.selection.rebuild_broadcast();

  rep.ok = true;
  for (int k = 0; k < kk; ++k) {
    for (int n = 0; n < np; ++n) {
      int count = 0;
      for (int i = 0; i < m; ++i)
        if (rep.selection.device(i, n, k)) ++count;
      if (count != 1) {
        rep.ok = false;
        rep.violations.push_back(
            "one-hot: device " + std::to_string(k) + " position " +
            std::to_string(n) + " has " + std::to_string(count) +
            " blocks after rounding (needs exactly 1)");
      }
    }
    double score = 0.0;
    for (int n = 0; n < np; ++n) {
      double best = 0.0;
      for (int i = 0; i < m; ++i)
        if (rep.selection.device(i, n, k)) best = std::max(best, table(i, n, k));
      score += best;
    }
    if (score < qos[k] - 1e-9) {
      rep.ok = false;
      rep.violations.push_back("QoS: device " + std::to_string(k) +
                               " assembled score " + std::to_string(score) +
                               " below threshold " + std::to_string(qos[k]));
    }
  }
  return rep;
}

}  // namespace mba
