#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mba/core.hpp"
#include "mba/harness.hpp"

namespace mba {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Score table: {M, N, K, scores: row-major [i][n][k]}.
// ---------------------------------------------------------------------------

inline json score_table_to_json(const ScoreTable& t) {
  return json{{"M", t.models()},
              {"N", t.positions()},
              {"K", t.tasks()},
              {"scores", t.raw()}};
}

inline ScoreTable score_table_from_json(const json& j) {
  try {
    int m = j.at("M"), n = j.at("N"), k = j.at("K");
    ScoreTable t(m, n, k);
    auto scores = j.at("scores").get<std::vector<double>>();
    if (scores.size() != t.raw().size())
      throw config_error("scores array has wrong length for MxNxK");
    t.raw() = std::move(scores);
    return t;
  } catch (const json::exception& e) {
    throw config_error(std::string("bad score-table JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Selection: {objective, alpha_broadcast: [[i,n]], alpha_device: {k: [[i,n]]}}.
// ---------------------------------------------------------------------------

inline json selection_to_json(const SelectionMatrix& sel) {
  json broadcast = json::array();
  for (const auto& b : sel.broadcast_blocks())
    broadcast.push_back({b.model, b.position});
  json device = json::object();
  for (int k = 0; k < sel.devices(); ++k) {
    json list = json::array();
    for (int i = 0; i < sel.models(); ++i)
      for (int n = 0; n < sel.positions(); ++n)
        if (sel.device(i, n, k)) list.push_back({i, n});
    device[std::to_string(k)] = std::move(list);
  }
  return json{{"objective", sel.broadcast_count()},
              {"alpha_broadcast", std::move(broadcast)},
              {"alpha_device", std::move(device)}};
}

inline SelectionMatrix selection_from_json(const json& j, int models,
                                           int positions, int devices) {
  try {
    SelectionMatrix sel(models, positions, devices);
    const auto& device = j.at("alpha_device");
    for (int k = 0; k < devices; ++k) {
      for (const auto& pair : device.at(std::to_string(k))) {
        int i = pair.at(0), n = pair.at(1);
        if (i < 0 || i >= models || n < 0 || n >= positions)
          throw config_error("selection block index out of range");
        sel.set_device(i, n, k, true);
      }
    }
    sel.rebuild_broadcast();
    return sel;
  } catch (const json::exception& e) {
    throw config_error(std::string("bad selection JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Power schedule.
// ---------------------------------------------------------------------------

inline json schedule_to_json(const PowerSchedule& s,
                             const std::vector<double>& channels) {
  json blocks = json::array();
  for (int i = 0; i < s.models; ++i)
    for (int n = 0; n < s.positions; ++n) {
      if (s.latency(i, n) <= 0.0) continue;
      blocks.push_back({{"i", i},
                        {"n", n},
                        {"H_eq", channels[i * s.positions + n]},
                        {"p_watts", s.power(i, n)},
                        {"T_seconds", s.latency(i, n)}});
    }
  return json{{"beta", s.beta},
              {"blocks", std::move(blocks)},
              {"total_latency_s", s.total_latency_s},
              {"total_energy_j", s.total_energy_j}};
}

// ---------------------------------------------------------------------------
// Scenario file: radio parameters plus the task map and thresholds.
// Accepts either total noise power "N0" or "noise_density" (times B).
// ---------------------------------------------------------------------------

struct ScenarioFile {
  Scenario scenario;
  std::vector<int> task_model;
};

inline ScenarioFile scenario_from_json(const json& j) {
  try {
    ScenarioFile f;
    f.scenario.gain = j.at("H").get<std::vector<double>>();
    f.scenario.devices = static_cast<int>(f.scenario.gain.size());
    f.scenario.qos = j.at("c").get<std::vector<double>>();
    f.scenario.bandwidth_hz = j.at("B");
    if (j.contains("N0"))
      f.scenario.noise_w = j.at("N0");
    else
      f.scenario.noise_w =
          j.at("noise_density").get<double>() * f.scenario.bandwidth_hz;
    f.scenario.block_bits = j.at("Q");
    f.scenario.energy_budget_j = j.at("E");
    f.task_model = j.at("task_model").get<std::vector<int>>();
    f.scenario.validate();
    return f;
  } catch (const json::exception& e) {
    throw config_error(std::string("bad scenario JSON: ") + e.what());
  }
}

inline json scenario_to_json(const ScenarioFile& f) {
  return json{{"H", f.scenario.gain},
              {"c", f.scenario.qos},
              {"B", f.scenario.bandwidth_hz},
              {"N0", f.scenario.noise_w},
              {"Q", f.scenario.block_bits},
              {"E", f.scenario.energy_budget_j},
              {"task_model", f.task_model}};
}

// ---------------------------------------------------------------------------
// Experiment config.
// ---------------------------------------------------------------------------

inline void config_from_json(const json& j, ExperimentConfig& cfg) {
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("seed", cfg.seed);
    get("models", cfg.models);
    get("positions", cfg.positions);
    get("devices", cfg.devices);
    get("bandwidth_hz", cfg.bandwidth_hz);
    get("noise_w", cfg.noise_w_total);
    if (j.contains("noise_density_w_per_hz"))
      cfg.noise_w_total =
          j.at("noise_density_w_per_hz").get<double>() * cfg.bandwidth_hz;
    get("path_loss", cfg.path_loss);
    get("block_bits", cfg.block_bits);
    get("energy_budget_j", cfg.energy_budget_j);
    get("rho", cfg.rho);
    get("trials", cfg.trials);
    get("bnb_variable_cap", cfg.bnb_variable_cap);
    get("sweep_grid", cfg.sweep_grid);
    if (j.contains("selector")) {
      std::string s = j.at("selector");
      if (s == "greedy")
        cfg.selector = Selector::Greedy;
      else if (s == "bnb")
        cfg.selector = Selector::BranchAndBound;
      else
        throw config_error("selector must be 'greedy' or 'bnb'");
    }
    if (j.contains("sweep_axis")) {
      std::string s = j.at("sweep_axis");
      if (s == "energy")
        cfg.sweep_axis = SweepAxis::Energy;
      else if (s == "devices")
        cfg.sweep_axis = SweepAxis::Devices;
      else if (s == "rho")
        cfg.sweep_axis = SweepAxis::Rho;
      else
        throw config_error("sweep_axis must be energy, devices or rho");
    }
    if (j.contains("game")) {
      const json& g = j.at("game");
      auto getg = [&](const char* key, double& field) {
        if (g.contains(key)) field = g.at(key).get<double>();
      };
      getg("base_low", cfg.game.base_low);
      getg("base_high", cfg.game.base_high);
      getg("reuse_low", cfg.game.reuse_low);
      getg("reuse_high", cfg.game.reuse_high);
      getg("cross_jitter", cfg.game.cross_jitter);
      getg("baseline", cfg.game.baseline);
      getg("interaction_count", cfg.game.interaction_count);
      getg("interaction_low", cfg.game.interaction_low);
      getg("interaction_high", cfg.game.interaction_high);
    }
    if (j.contains("shapley")) {
      const json& s = j.at("shapley");
      if (s.contains("permutations"))
        cfg.shapley.permutations = s.at("permutations");
      if (s.contains("exact_player_limit"))
        cfg.shapley.exact_player_limit = s.at("exact_player_limit");
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("bad experiment config JSON: ") + e.what());
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw config_error("cannot parse " + path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write " + path);
  out << content;
}

}  // namespace mba
