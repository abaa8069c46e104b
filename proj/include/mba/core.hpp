#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mba {

/// Instance cannot satisfy its constraints (QoS threshold, energy budget, ...).
struct infeasible_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical routine failed (iteration cap, bracket expansion, bad pivot).
struct solver_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad configuration or malformed input file.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Instance too large for an exhaustive routine.
struct capacity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A parameter block identified by its source model and cascade position.
struct BlockId {
  int model = 0;
  int position = 0;
  friend bool operator==(const BlockId&, const BlockId&) = default;
  friend auto operator<=>(const BlockId&, const BlockId&) = default;
};

/// The AI library: M models of N cascaded blocks each, plus the map from
/// each served task to its task-specific model.
struct Library {
  int models = 0;                // M
  int positions = 0;             // N, blocks per model
  std::vector<int> task_model;   // task k -> model holding its dedicated blocks

  int tasks() const { return static_cast<int>(task_model.size()); }

  static Library identity(int models, int positions, int tasks) {
    Library lib;
    lib.models = models;
    lib.positions = positions;
    lib.task_model.resize(tasks);
    for (int k = 0; k < tasks; ++k) lib.task_model[k] = k;
    lib.validate();
    return lib;
  }

  void validate() const {
    if (models < 1 || positions < 1)
      throw config_error("library requires M >= 1 and N >= 1");
    std::vector<char> seen(models, 0);
    for (int m : task_model) {
      if (m < 0 || m >= models)
        throw config_error("task_model index out of range");
      if (seen[m]) throw config_error("task_model must be injective");
      seen[m] = 1;
    }
  }
};

/// Dense reusability scores I[i][n][k] >= 0, row-major over (model, position, task).
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(int models, int positions, int tasks)
      : models_(models),
        positions_(positions),
        tasks_(tasks),
        data_(static_cast<std::size_t>(models) * positions * tasks, 0.0) {}

  int models() const { return models_; }
  int positions() const { return positions_; }
  int tasks() const { return tasks_; }

  double operator()(int i, int n, int k) const { return data_[index(i, n, k)]; }
  double& operator()(int i, int n, int k) { return data_[index(i, n, k)]; }

  const std::vector<double>& raw() const { return data_; }
  std::vector<double>& raw() { return data_; }

  /// I_i^{(k)} = sum_n I_{i,n}^{(k)}: whole-model score for one task.
  double model_score(int i, int k) const {
    double s = 0.0;
    for (int n = 0; n < positions_; ++n) s += (*this)(i, n, k);
    return s;
  }

  void validate(const Library& lib) const {
    if (models_ != lib.models || positions_ != lib.positions)
      throw config_error("score table dimensions do not match library");
    for (double v : data_)
      if (!(v >= 0.0)) throw config_error("reusability scores must be >= 0");
  }

 private:
  std::size_t index(int i, int n, int k) const {
    return (static_cast<std::size_t>(i) * positions_ + n) * tasks_ + k;
  }

  int models_ = 0, positions_ = 0, tasks_ = 0;
  std::vector<double> data_;
};

/// Radio and QoS parameters of one downloading scenario. All SI units.
struct Scenario {
  int devices = 0;               // K
  std::vector<double> gain;      // H_k, channel power gains
  std::vector<double> qos;       // c_k, assembled-score thresholds
  double bandwidth_hz = 0.0;     // B
  double noise_w = 0.0;          // N0, total noise power at the receiver
  double block_bits = 0.0;       // Q
  double energy_budget_j = 0.0;  // E

  void validate() const {
    if (devices < 1) throw config_error("scenario requires K >= 1");
    if (static_cast<int>(gain.size()) != devices ||
        static_cast<int>(qos.size()) != devices)
      throw config_error("gain/qos vectors must have K entries");
    for (double h : gain)
      if (!(h > 0.0)) throw config_error("channel gains must be > 0");
    for (double c : qos)
      if (!(c >= 0.0)) throw config_error("QoS thresholds must be >= 0");
    if (!(bandwidth_hz > 0.0) || !(noise_w > 0.0) || !(block_bits > 0.0) ||
        !(energy_budget_j > 0.0))
      throw config_error("B, N0, Q, E must all be > 0");
  }
};

/// Binary block-selection indicators: per-device alpha[i][n][k] and the
/// derived broadcast union alpha[i][n].
class SelectionMatrix {
 public:
  SelectionMatrix() = default;
  SelectionMatrix(int models, int positions, int devices)
      : models_(models),
        positions_(positions),
        devices_(devices),
        per_device_(static_cast<std::size_t>(models) * positions * devices, 0),
        broadcast_(static_cast<std::size_t>(models) * positions, 0) {}

  int models() const { return models_; }
  int positions() const { return positions_; }
  int devices() const { return devices_; }

  bool device(int i, int n, int k) const {
    return per_device_[dev_index(i, n, k)] != 0;
  }
  void set_device(int i, int n, int k, bool v) {
    per_device_[dev_index(i, n, k)] = v ? 1 : 0;
  }

  bool broadcast(int i, int n) const { return broadcast_[bc_index(i, n)] != 0; }
  void set_broadcast(int i, int n, bool v) {
    broadcast_[bc_index(i, n)] = v ? 1 : 0;
  }

  /// Normalizes the union: alpha[i][n] = 1 iff some device requests (i,n).
  void rebuild_broadcast() {
    std::fill(broadcast_.begin(), broadcast_.end(), 0);
    for (int i = 0; i < models_; ++i)
      for (int n = 0; n < positions_; ++n)
        for (int k = 0; k < devices_; ++k)
          if (device(i, n, k)) {
            set_broadcast(i, n, true);
            break;
          }
  }

  int broadcast_count() const {
    return static_cast<int>(
        std::count(broadcast_.begin(), broadcast_.end(), 1));
  }

  std::vector<BlockId> broadcast_blocks() const {
    std::vector<BlockId> out;
    for (int i = 0; i < models_; ++i)
      for (int n = 0; n < positions_; ++n)
        if (broadcast(i, n)) out.push_back({i, n});
    return out;
  }

  std::vector<int> requesters(int i, int n) const {
    std::vector<int> out;
    for (int k = 0; k < devices_; ++k)
      if (device(i, n, k)) out.push_back(k);
    return out;
  }

  void validate() const {
    for (int i = 0; i < models_; ++i)
      for (int n = 0; n < positions_; ++n) {
        bool any = false;
        for (int k = 0; k < devices_; ++k) any = any || device(i, n, k);
        if (any && !broadcast(i, n))
          throw config_error("per-device indicator without broadcast flag");
      }
  }

 private:
  std::size_t dev_index(int i, int n, int k) const {
    return (static_cast<std::size_t>(i) * positions_ + n) * devices_ + k;
  }
  std::size_t bc_index(int i, int n) const {
    return static_cast<std::size_t>(i) * positions_ + n;
  }

  int models_ = 0, positions_ = 0, devices_ = 0;
  std::vector<std::uint8_t> per_device_;
  std::vector<std::uint8_t> broadcast_;
};

/// Per-block transmit power and latency for the broadcast blocks, flat over
/// (model, position). Entries are 0 exactly for non-broadcast blocks.
struct PowerSchedule {
  int models = 0, positions = 0;
  std::vector<double> power_w;     // p[i*N + n]
  std::vector<double> latency_s;   // T[i*N + n]
  double total_latency_s = 0.0;
  double total_energy_j = 0.0;
  double beta = 0.0;               // energy-constraint multiplier

  double power(int i, int n) const { return power_w[i * positions + n]; }
  double latency(int i, int n) const { return latency_s[i * positions + n]; }
};

/// Shannon link rate B*log2(1 + p*H/N0) in bits/s.
inline double link_rate(double p, double h, double bandwidth_hz,
                        double noise_w) {
  if (!(bandwidth_hz > 0.0) || !(noise_w > 0.0))
    throw std::domain_error("link_rate requires B > 0 and N0 > 0");
  if (p < 0.0 || h < 0.0)
    throw std::domain_error("link_rate requires p >= 0 and H >= 0");
  return bandwidth_hz * std::log2(1.0 + p * h / noise_w);
}

/// Broadcast rate of block (i,n): the link rate of the worst requesting device.
inline double broadcast_rate(int i, int n, const SelectionMatrix& sel,
                             double p, const Scenario& sc) {
  double worst = std::numeric_limits<double>::infinity();
  bool any = false;
  for (int k = 0; k < sel.devices(); ++k) {
    if (!sel.device(i, n, k)) continue;
    any = true;
    worst = std::min(worst,
                     link_rate(p, sc.gain[k], sc.bandwidth_hz, sc.noise_w));
  }
  if (!any)
    throw std::domain_error("broadcast_rate: block (" + std::to_string(i) +
                            "," + std::to_string(n) +
                            ") has no requesting device");
  return worst;
}

/// Latency Q / broadcast_rate for one block; 0 by convention if nobody requests it.
inline double block_latency(int i, int n, const SelectionMatrix& sel, double p,
                            const Scenario& sc) {
  bool any = false;
  for (int k = 0; k < sel.devices(); ++k) any = any || sel.device(i, n, k);
  if (!any) return 0.0;
  double rate = broadcast_rate(i, n, sel, p, sc);
  if (!(rate > 0.0))
    throw std::domain_error("block_latency: zero rate for a requested block");
  return sc.block_bits / rate;
}

/// Best per-position assembly from the blocks received by one device.
struct AssembledModel {
  double score = 0.0;
  std::vector<int> blocks;  // blocks[n] = chosen model index at position n
};

/// Assembles the best model for device k from its received set:
/// score = sum_n max_i alpha[i][n][k] * I[i][n][k], ties to the lowest model index.
inline AssembledModel assembled_score(const SelectionMatrix& sel, int k,
                                      const ScoreTable& table) {
  AssembledModel out;
  out.blocks.resize(sel.positions(), -1);
  for (int n = 0; n < sel.positions(); ++n) {
    double best = -1.0;
    int best_model = -1;
    for (int i = 0; i < sel.models(); ++i) {
      if (!sel.device(i, n, k)) continue;
      double s = table(i, n, k);
      if (s > best) {
        best = s;
        best_model = i;
      }
    }
    if (best_model < 0)
      throw infeasible_error("device " + std::to_string(k) +
                             " has no block at position " + std::to_string(n));
    out.blocks[n] = best_model;
    out.score += best;
  }
  return out;
}

/// Constraint-by-constraint evaluation of a finished schedule.
struct ScheduleReport {
  double total_latency_s = 0.0;
  double total_energy_j = 0.0;
  std::vector<double> device_score;
  bool architecture_ok = false;  // one block per position per device
  bool qos_ok = false;           // every assembled score meets its threshold
  bool energy_ok = false;        // total energy within budget
  bool all_ok() const { return architecture_ok && qos_ok && energy_ok; }
};

inline ScheduleReport evaluate_schedule(const SelectionMatrix& sel,
                                        const PowerSchedule& schedule,
                                        const Scenario& sc,
                                        const ScoreTable& table) {
  ScheduleReport rep;
  rep.device_score.assign(sc.devices, 0.0);
  rep.architecture_ok = true;
  rep.qos_ok = true;
  for (int k = 0; k < sc.devices; ++k) {
    try {
      rep.device_score[k] = assembled_score(sel, k, table).score;
    } catch (const infeasible_error&) {
      rep.architecture_ok = false;
      rep.device_score[k] = 0.0;
    }
    if (rep.device_score[k] < sc.qos[k] - 1e-9 * std::max(1.0, sc.qos[k]))
      rep.qos_ok = false;
  }
  for (int i = 0; i < sel.models(); ++i)
    for (int n = 0; n < sel.positions(); ++n) {
      if (!sel.broadcast(i, n)) continue;
      double t = schedule.latency(i, n);
      double p = schedule.power(i, n);
      rep.total_latency_s += t;
      rep.total_energy_j += t * p;
    }
  rep.energy_ok = rep.total_energy_j <= sc.energy_budget_j * (1.0 + 1e-6);
  return rep;
}

}  // namespace mba
