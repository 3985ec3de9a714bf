#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmpc/comfort.hpp"
#include "dmpc/sim.hpp"

namespace fs = std::filesystem;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("DMPC_OUT_DIR");
  return env && *env ? env : ".";
}

dmpc::sim::Scenario load_scenario(const std::string& path) {
  return path.empty() ? dmpc::sim::Scenario{} : dmpc::sim::Scenario::load(path);
}

void print_metrics(const dmpc::sim::MetricsReport& m) {
  std::printf("%-20s avg_power=%.2f W  cost=%.4f CNY  pmv[q1,med,q3]=[%.3f,%.3f,%.3f]  "
              "wall=%.3f s  max_seq=%.3f s  degraded=%d\n",
              m.strategy.c_str(), m.avg_power_w, m.total_cost_cny, m.pmv_q1, m.pmv_median,
              m.pmv_q3, m.wall_seconds, m.max_sequential_seconds, m.degraded_steps);
}

int run_fit_pwa(const std::string& season, const std::vector<double>& domain,
                const std::string& out) {
  const dmpc::comfort::ComfortParams params = season == "winter"
                                                  ? dmpc::comfort::ComfortParams::winter()
                                                  : dmpc::comfort::ComfortParams::summer();
  const dmpc::comfort::Rect rect = {domain[0], domain[1], domain[0], domain[1]};
  const double split_ta = 0.5 * (rect.ta_lo + rect.ta_hi);
  const double split_tr = 0.5 * (rect.tr_lo + rect.tr_hi);
  const dmpc::comfort::PwaComfortModel model =
      dmpc::comfort::fit_pwa(params, rect, split_ta, split_tr);
  model.save(out);
  std::printf("model: %s\nMAE: %.6f\nmax_abs_err: %.6f\ncontinuity_gap: %.6g\n", out.c_str(),
              model.report.mae, model.report.max_abs_err, model.report.continuity_gap);
  if (model.report.mae > 0.02) {
    std::fprintf(stderr, "error: fit MAE %.6f exceeds 0.02\n", model.report.mae);
    return 3;
  }
  return 0;
}

int run_simulate(const std::string& scenario_path, const std::string& strategy_name,
                 const std::string& out, int jobs, long seed) {
  dmpc::sim::Scenario sc = load_scenario(scenario_path);
  if (seed >= 0) sc.seed = static_cast<unsigned>(seed);
  const auto strategy = dmpc::sim::parse_strategy(strategy_name);
  fs::create_directories(out);

  const dmpc::sim::SimulationResult res = dmpc::sim::run_closed_loop(sc, *strategy, jobs);
  dmpc::sim::write_trace_csv(res.trace, out + "/trace.csv");
  dmpc::sim::write_plot_csv(res.trace, out + "/plot.csv");
  {
    std::ofstream f(out + "/metrics.json", std::ios::binary);
    f << res.metrics.to_json();
  }
  sc.save(out + "/scenario.json");  // echo effective config incl. seed
  print_metrics(res.metrics);
  return 0;
}

int run_compare(const std::string& scenario_path, const std::string& strategies_csv,
                const std::string& out, int jobs, long seed) {
  dmpc::sim::Scenario sc = load_scenario(scenario_path);
  if (seed >= 0) sc.seed = static_cast<unsigned>(seed);

  std::vector<dmpc::sim::Strategy> strategies;
  std::stringstream ss(strategies_csv);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto s = dmpc::sim::parse_strategy(name);
    if (!s) throw dmpc::ScenarioError("unknown strategy: " + name);
    strategies.push_back(*s);
  }
  fs::create_directories(out);
  const auto rows = dmpc::sim::compare_strategies(sc, strategies, jobs);
  dmpc::sim::write_comparison_csv(rows, out + "/comparison.csv");
  sc.save(out + "/scenario.json");
  for (const auto& m : rows) print_metrics(m);
  return 0;
}

int run_report(const std::string& trace_path, const std::string& scenario_path,
               const std::string& out) {
  const dmpc::sim::Scenario sc = load_scenario(scenario_path);
  const dmpc::sim::SimulationTrace trace = dmpc::sim::read_trace_csv(trace_path);
  const dmpc::sim::MetricsReport m = dmpc::sim::metrics_from_trace(trace, sc);
  const std::string text = m.to_json();
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw dmpc::ScenarioError("cannot write: " + out);
    f << text;
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed MPC toolkit for multi-zone HVAC energy/comfort optimization"};
  app.require_subcommand(1);

  // fit-pwa
  std::string fit_season = "summer";
  std::vector<double> fit_domain = {22.0, 30.0};
  std::string fit_out = default_out_dir() + "/pwa-model.json";
  auto* fit = app.add_subcommand("fit-pwa", "Fit the piecewise-affine comfort surrogate");
  fit->add_option("--season", fit_season)->check(CLI::IsMember({"summer", "winter"}));
  fit->add_option("--domain", fit_domain, "Temperature range lo hi (degC)")->expected(2);
  fit->add_option("--out", fit_out, "Output model file");

  // simulate
  std::string sim_scenario, sim_strategy;
  std::string sim_out = default_out_dir();
  int sim_jobs = 1;
  long sim_seed = -1;
  auto* simc = app.add_subcommand("simulate", "Run one closed-loop simulation");
  simc->add_option("--scenario", sim_scenario, "Scenario JSON (omit for the default scenario)");
  simc->add_option("--strategy", sim_strategy)
      ->required()
      ->check(CLI::IsMember(dmpc::sim::strategy_names()));
  simc->add_option("--out", sim_out, "Output directory");
  simc->add_option("--jobs", sim_jobs, "Zone-level parallel fan-out")->check(CLI::PositiveNumber);
  simc->add_option("--seed", sim_seed, "Override the scenario seed");

  // compare
  std::string cmp_scenario;
  std::string cmp_strategies = "centralized-linear,centralized-pwa,distributed-pwa";
  std::string cmp_out = default_out_dir();
  int cmp_jobs = 1;
  long cmp_seed = -1;
  auto* cmp = app.add_subcommand("compare", "Run several strategies on one scenario");
  cmp->add_option("--scenario", cmp_scenario);
  cmp->add_option("--strategies", cmp_strategies, "Comma-separated strategy names");
  cmp->add_option("--out", cmp_out, "Output directory");
  cmp->add_option("--jobs", cmp_jobs)->check(CLI::PositiveNumber);
  cmp->add_option("--seed", cmp_seed, "Override the scenario seed");

  // report
  std::string rep_trace, rep_scenario, rep_out;
  auto* rep = app.add_subcommand("report", "Recompute metrics from a trace CSV");
  rep->add_option("--trace", rep_trace)->required();
  rep->add_option("--scenario", rep_scenario);
  rep->add_option("--out", rep_out, "Optional metrics JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) return run_fit_pwa(fit_season, fit_domain, fit_out);
    if (simc->parsed()) return run_simulate(sim_scenario, sim_strategy, sim_out, sim_jobs, sim_seed);
    if (cmp->parsed()) return run_compare(cmp_scenario, cmp_strategies, cmp_out, cmp_jobs, cmp_seed);
    if (rep->parsed()) return run_report(rep_trace, rep_scenario, rep_out);
  } catch (const dmpc::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const dmpc::ScenarioError& e) {
    std::fprintf(stderr, "scenario error: %s\n", e.what());
    return 2;
  } catch (const dmpc::ParameterError& e) {
    std::fprintf(stderr, "parameter error: %s\n", e.what());
    return 2;
  }
  return 1;
}
