#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dmpc/admm.hpp"
#include "dmpc/comfort.hpp"
#include "dmpc/errors.hpp"
#include "dmpc/mpc.hpp"
#include "dmpc/thermal.hpp"

namespace dmpc::sim {

/// Multi-floor building with a 2x2 zone layout per floor; adjacency maps
/// each orientation to a neighbor zone or to ambient (-1).
struct BuildingTopology {
  int floors = 9;
  int zones_per_floor = 4;
  std::vector<std::array<int, thermal::kOrientations>> adjacency;

  int zones() const { return static_cast<int>(adjacency.size()); }
  void validate() const;
  /// floors x (2x2) layout: zones 0/1 on the north side, 2/3 on the south.
  static BuildingTopology standard(int floors = 9);
  /// Single zone, all walls exterior.
  static BuildingTopology single_zone();
};

/// Synthetic diurnal weather profile (sinusoidal ambient, clipped half-sine
/// solar with east-morning / west-afternoon phasing).
struct WeatherSpec {
  double t_mean = 26.0;
  double t_amp = 3.0;
  double t_peak_hour = 15.0;
  double solar_wall_peak_n = 20.0;  // W
  double solar_wall_peak_e = 50.0;
  double solar_wall_peak_w = 50.0;
  double solar_wall_peak_s = 60.0;
  double solar_zone_peak = 120.0;
  double sunrise_hour = 6.0;
  double sunset_hour = 20.0;
};

/// Per-zone internal load model.
struct ZoneLoads {
  double area_m2 = 16.0;
  double m2_per_occupant = 12.0;
  double occupant_w = 100.0;  // sensible load per occupant
  double lighting_w_per_m2 = 0.75;
  double equipment_w_per_m2 = 0.4;

  double internal_gain_w(bool occupied) const {
    return occupied ? area_m2 / m2_per_occupant * occupant_w +
                          area_m2 * (lighting_w_per_m2 + equipment_w_per_m2)
                    : 0.0;
  }
};

/// One control step of exogenous conditions, identical for all zones.
struct WeatherSample {
  double t_out = 0;
  std::array<double, thermal::kOrientations> q_solar_wall{};  // n, e, w, s
  double q_internal = 0;
  double q_solar_zone = 0;
};

std::vector<WeatherSample> synth_weather(const WeatherSpec& spec, const ZoneLoads& loads,
                                         const mpc::Schedules& sched, int steps, double dt);

/// CSV columns: timestamp, T_out, Q_solar_wall_n, Q_solar_wall_e,
/// Q_solar_wall_w, Q_solar_wall_s, Q_internal, Q_solar_zone.
std::vector<WeatherSample> load_weather_csv(const std::string& path);

enum class Strategy { DistributedPwa, CentralizedPwa, CentralizedLinear };

const char* strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(const std::string& name);
std::vector<std::string> strategy_names();

struct Scenario {
  BuildingTopology topology = BuildingTopology::standard();
  thermal::ZoneThermalParams zone_params = thermal::ZoneThermalParams::reference();
  std::string season = "summer";
  mpc::MpcConfig mpc;
  admm::AdmmConfig admm;
  mpc::Schedules schedules = mpc::Schedules::standard();
  WeatherSpec weather;
  std::string weather_csv;  // empty: synthesize
  ZoneLoads loads;
  comfort::Rect pwa_domain{22, 30, 22, 30};
  int steps = 96;
  double x0_temp_c = 29.0;
  double plant_mismatch = 0.0;  // multiplicative parameter perturbation, e.g. 0.1
  unsigned seed = 1;

  comfort::ComfortParams comfort_params() const;
  void validate() const;

  std::string to_json() const;
  static Scenario from_json(const std::string& text);
  void save(const std::string& path) const;
  static Scenario load(const std::string& path);
};

struct ZoneStepRecord {
  double t_z = 0;        // air temperature after applying the input, degC
  double t_r = 0;        // mean radiant after the step, degC
  double u_w = 0;        // applied input, W
  double pmv_exact = 0;  // at the post-step operating point
  double pmv_pwa = 0;
  int region = 0;        // active region of the first horizon step
  double local_cost_cny = 0;
};

struct StepRecord {
  int step = 0;
  double hour = 0;
  double tariff = 0;
  int occupied = 0;
  double sum_u_w = 0;
  double energy_cost_cny = 0;  // increment of this step
  int admm_iterations = 0;
  int restarts = 0;
  int degraded = 0;
  std::vector<ZoneStepRecord> zones;
};

struct SimulationTrace {
  std::vector<StepRecord> steps;
  double dt = 900;
  std::string strategy;
  unsigned seed = 0;
};

struct MetricsReport {
  std::string strategy;
  double avg_power_w = 0;       // mean applied power per zone
  double total_cost_cny = 0;
  double pmv_min = 0, pmv_q1 = 0, pmv_median = 0, pmv_q3 = 0, pmv_max = 0;  // occupied
  double wall_seconds = 0;
  double max_sequential_seconds = 0;
  int degraded_steps = 0;
  int total_admm_iterations = 0;
  double max_budget_violation_w = 0;

  std::string to_json() const;
};

struct SimulationResult {
  SimulationTrace trace;
  MetricsReport metrics;
};

SimulationResult run_closed_loop(const Scenario& scenario, Strategy strategy, int jobs = 1);

/// Recomputes a MetricsReport from trace rows alone (timings excluded);
/// used by the report subcommand and the drift check.
MetricsReport metrics_from_trace(const SimulationTrace& trace, const Scenario& scenario);

void write_trace_csv(const SimulationTrace& trace, const std::string& path);
SimulationTrace read_trace_csv(const std::string& path);
void write_plot_csv(const SimulationTrace& trace, const std::string& path);

std::vector<MetricsReport> compare_strategies(const Scenario& scenario,
                                              const std::vector<Strategy>& strategies,
                                              int jobs = 1);
void write_comparison_csv(const std::vector<MetricsReport>& rows, const std::string& path);

}  // namespace dmpc::sim
