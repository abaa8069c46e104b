// Command-line front end: score-table generation, parameter selection,
// power control, single-trial simulation, experiment sweeps and self checks.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mba/harness.hpp"
#include "mba/json_io.hpp"
#include "mba/power.hpp"
#include "mba/selection.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitSolver = 3;
constexpr int kExitConfig = 4;

void emit(const std::string& path, const std::string& content) {
  if (path.empty())
    std::cout << content;
  else
    mba::write_text_file(path, content);
}

mba::ExperimentConfig load_config(const std::string& path) {
  mba::ExperimentConfig cfg;
  if (!path.empty()) mba::config_from_json(mba::load_json_file(path), cfg);
  return cfg;
}

int cmd_gen_scores(const std::string& config_path, std::uint64_t seed,
                   bool seed_given, const std::string& out) {
  mba::ExperimentConfig cfg = load_config(config_path);
  if (seed_given) cfg.seed = seed;
  mba::Instance inst = mba::make_instance(cfg, cfg.seed);
  emit(out, mba::score_table_to_json(inst.table).dump(2) + "\n");
  return kExitOk;
}

int cmd_select(const std::string& table_path, const std::string& scenario_path,
               const std::string& method, const std::string& out) {
  mba::ScoreTable table =
      mba::score_table_from_json(mba::load_json_file(table_path));
  mba::ScenarioFile scen =
      mba::scenario_from_json(mba::load_json_file(scenario_path));
  mba::Library lib;
  lib.models = table.models();
  lib.positions = table.positions();
  lib.task_model = scen.task_model;
  lib.validate();
  table.validate(lib);

  mba::SelectionResult res =
      method == "bnb"
          ? [&] {
              mba::BnBResult r =
                  mba::bnb_select(lib, table, scen.scenario.qos);
              return mba::SelectionResult{std::move(r.selection), r.objective};
            }()
          : mba::greedy_select(lib, table, scen.scenario.qos);
  emit(out, mba::selection_to_json(res.selection).dump(2) + "\n");
  return kExitOk;
}

int cmd_power(const std::string& selection_path,
              const std::string& scenario_path, const std::string& table_path,
              const std::string& out) {
  mba::ScoreTable table =
      mba::score_table_from_json(mba::load_json_file(table_path));
  mba::ScenarioFile scen =
      mba::scenario_from_json(mba::load_json_file(scenario_path));
  mba::SelectionMatrix sel = mba::selection_from_json(
      mba::load_json_file(selection_path), table.models(), table.positions(),
      scen.scenario.devices);
  mba::PowerSchedule sched =
      mba::optimal_power_control(sel, scen.scenario);
  std::vector<double> channels = mba::equivalent_channels(sel, scen.scenario);
  emit(out, mba::schedule_to_json(sched, channels).dump(2) + "\n");
  return kExitOk;
}

std::string trial_summary(const char* scheme, const mba::TrialResult& r,
                          bool as_json) {
  if (as_json) {
    mba::json j{{"scheme", scheme},
                {"total_latency_s", r.total_latency_s},
                {"energy_used_j", r.energy_used_j},
                {"blocks", r.blocks},
                {"qos_ok", r.qos_ok}};
    return j.dump() + "\n";
  }
  return std::string(scheme) + "," + mba::format_number(r.total_latency_s) +
         "," + mba::format_number(r.energy_used_j) + "," +
         std::to_string(r.blocks) + "," + (r.qos_ok ? "1" : "0") + "\n";
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 const std::string& format, const std::string& out) {
  mba::ExperimentConfig cfg = load_config(config_path);
  cfg.seed = seed;
  bool as_json = format == "json";
  std::string text;
  if (!as_json) text += "scheme,total_latency_s,energy_used_j,blocks,qos_ok\n";
  text += trial_summary("mba", mba::run_mba(cfg, cfg.seed), as_json);
  text += trial_summary("constant_power",
                        mba::run_constant_power_mba(cfg, cfg.seed), as_json);
  text += trial_summary("unicast", mba::run_unicast(cfg, cfg.seed), as_json);
  emit(out, text);
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, std::uint64_t seed,
              bool seed_given, const std::string& format,
              const std::string& out) {
  mba::ExperimentConfig cfg = load_config(config_path);
  if (seed_given) cfg.seed = seed;
  std::vector<mba::SweepRow> rows = mba::sweep(cfg);
  if (format == "json") {
    mba::json j = mba::json::array();
    for (const auto& r : rows)
      j.push_back({{"axis_value", r.axis_value},
                   {"scheme", r.scheme},
                   {"trials", r.trials},
                   {"mean_latency_s", r.mean_latency_s},
                   {"std_latency_s", r.std_latency_s},
                   {"mean_energy_j", r.mean_energy_j},
                   {"mean_blocks", r.mean_blocks},
                   {"qos_ok_rate", r.qos_ok_rate}});
    emit(out, j.dump(2) + "\n");
  } else {
    emit(out, mba::sweep_csv(rows));
  }
  return kExitOk;
}

int cmd_verify(std::uint64_t seed) {
  using namespace mba;
  bool all_ok = true;
  auto report = [&](const char* name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) std::cout << " — " << detail;
    std::cout << "\n";
    all_ok = all_ok && ok;
  };

  // PS/PC decoupling on tiny instances.
  {
    ExperimentConfig tiny;
    tiny.models = tiny.positions = tiny.devices = 2;
    tiny.rho = 0.8;
    tiny.energy_budget_j = 50.0;
    int pass = 0, total = 20;
    for (int s = 0; s < total; ++s)
      if (verify_decoupling(tiny, Rng::derive(seed, s)).pass) ++pass;
    report("selection/power decoupling (20 tiny seeds)", pass == total,
           std::to_string(pass) + "/" + std::to_string(total));
  }

  // Optimal selection against the exhaustive oracle.
  {
    int pass = 0, total = 25;
    for (int s = 0; s < total; ++s) {
      Rng rng(Rng::derive(seed, 1000 + s));
      int m = 2 + static_cast<int>(rng.below(2));
      int np = 1 + static_cast<int>(rng.below(3));
      int kk = 1 + static_cast<int>(rng.below(std::uint64_t(m)));
      Library lib = Library::identity(m, np, kk);
      ScoreTable table(m, np, kk);
      for (double& v : table.raw()) v = rng.uniform();
      std::vector<double> qos(kk);
      for (int k = 0; k < kk; ++k)
        qos[k] = 0.5 * table.model_score(lib.task_model[k], k);
      if (bnb_select(lib, table, qos).objective ==
          brute_force_select(lib, table, qos).objective)
        ++pass;
    }
    report("B&B matches brute force (25 random instances)", pass == total,
           std::to_string(pass) + "/" + std::to_string(total));
  }

  // KKT residuals of an optimized schedule.
  {
    ExperimentConfig cfg;
    cfg.models = cfg.devices = 4;
    cfg.positions = 3;
    cfg.shapley.permutations = 400;
    cfg.energy_budget_j = 40.0;
    Instance inst = make_instance(cfg, Rng::derive(seed, 7));
    SelectionResult sel =
        greedy_select(inst.library, inst.table, inst.scenario.qos);
    PowerSchedule sched = optimal_power_control(sel.selection, inst.scenario);
    KktReport kkt = kkt_residuals(sched, sel.selection, inst.scenario);
    report("KKT residuals <= 1e-6", kkt.ok(1e-6),
           "max residual " + format_number(kkt.max_residual()));
  }

  return all_ok ? kExitOk : kExitSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model broadcasting and assembling: block selection, power "
               "control and latency experiments"};
  app.require_subcommand(1);

  std::string config_path, table_path, scenario_path, selection_path;
  std::string out_path, method = "greedy", format = "csv";
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen-scores",
                                 "generate a synthetic reusability score table");
  gen->add_option("-c,--config", config_path, "experiment config JSON");
  auto* gen_seed = gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("-o,--output", out_path, "output path (default stdout)");

  auto* sel = app.add_subcommand("select", "run parameter selection");
  sel->add_option("--table", table_path, "score table JSON")->required();
  sel->add_option("--scenario", scenario_path, "scenario JSON")->required();
  sel->add_option("--method", method, "greedy | bnb")
      ->check(CLI::IsMember({"greedy", "bnb"}));
  sel->add_option("-o,--output", out_path, "output path (default stdout)");

  auto* pow = app.add_subcommand("power", "run optimal power control");
  pow->add_option("--selection", selection_path, "selection JSON")->required();
  pow->add_option("--table", table_path, "score table JSON")->required();
  pow->add_option("--scenario", scenario_path, "scenario JSON")->required();
  pow->add_option("-o,--output", out_path, "output path (default stdout)");

  auto* sim = app.add_subcommand("simulate", "single trial, all three schemes");
  sim->add_option("-c,--config", config_path, "experiment config JSON");
  sim->add_option("--seed", seed, "RNG seed")->required();
  sim->add_option("--format", format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  sim->add_option("-o,--output", out_path, "output path (default stdout)");

  auto* swp = app.add_subcommand("sweep", "grid run over the configured axis");
  swp->add_option("-c,--config", config_path, "experiment config JSON");
  swp->add_option("--seed", seed, "RNG seed")->required();
  swp->add_option("--format", format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  swp->add_option("-o,--output", out_path, "output path (default stdout)");

  auto* ver = app.add_subcommand("verify",
                                 "run decoupling, oracle and KKT self checks");
  ver->add_option("--seed", seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed())
      return cmd_gen_scores(config_path, seed, gen_seed->count() > 0, out_path);
    if (sel->parsed())
      return cmd_select(table_path, scenario_path, method, out_path);
    if (pow->parsed())
      return cmd_power(selection_path, scenario_path, table_path, out_path);
    if (sim->parsed()) return cmd_simulate(config_path, seed, format, out_path);
    if (swp->parsed())
      return cmd_sweep(config_path, seed, true, format, out_path);
    if (ver->parsed()) return cmd_verify(seed);
  } catch (const mba::infeasible_error& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const mba::capacity_error& e) {
    std::cerr << "instance too large: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mba::solver_error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const mba::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitConfig;
}
