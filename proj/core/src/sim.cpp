#include "dmpc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace dmpc::sim {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr std::array<int, thermal::kOrientations> kOpposite = {
    thermal::South, thermal::West, thermal::East, thermal::North};

}  // namespace

void BuildingTopology::validate() const {
  if (zones() < 1) throw ScenarioError("topology: no zones");
  for (int i = 0; i < zones(); ++i) {
    for (int o = 0; o < thermal::kOrientations; ++o) {
      const int nb = adjacency[static_cast<size_t>(i)][static_cast<size_t>(o)];
      if (nb < -1 || nb >= zones() || nb == i) {
        throw ScenarioError("topology: invalid neighbor id");
      }
      if (nb >= 0 &&
          adjacency[static_cast<size_t>(nb)][static_cast<size_t>(kOpposite[static_cast<size_t>(o)])] != i) {
        throw ScenarioError("topology: adjacency not symmetric");
      }
    }
  }
}

BuildingTopology BuildingTopology::standard(int floors) {
  if (floors < 1) throw ScenarioError("topology: floors must be >= 1");
  BuildingTopology t;
  t.floors = floors;
  t.zones_per_floor = 4;
  t.adjacency.resize(static_cast<size_t>(4 * floors));
  for (int f = 0; f < floors; ++f) {
    const int b = 4 * f;
    using namespace thermal;
    // 2x2 layout: 0 NW, 1 NE, 2 SW, 3 SE; walls between floors are ignored.
    t.adjacency[static_cast<size_t>(b + 0)] = {-1, b + 1, -1, b + 2};
    t.adjacency[static_cast<size_t>(b + 1)] = {-1, -1, b + 0, b + 3};
    t.adjacency[static_cast<size_t>(b + 2)] = {b + 0, b + 3, -1, -1};
    t.adjacency[static_cast<size_t>(b + 3)] = {b + 1, -1, b + 2, -1};
  }
  t.validate();
  return t;
}

BuildingTopology BuildingTopology::single_zone() {
  BuildingTopology t;
  t.floors = 1;
  t.zones_per_floor = 1;
  t.adjacency = {{-1, -1, -1, -1}};
  return t;
}

std::vector<WeatherSample> synth_weather(const WeatherSpec& spec, const ZoneLoads& loads,
                                         const mpc::Schedules& sched, int steps, double dt) {
  if (steps < 1) throw ScenarioError("synth_weather: steps must be >= 1");
  if (!(spec.sunrise_hour < spec.sunset_hour)) {
    throw ScenarioError("synth_weather: sunrise must precede sunset");
  }
  const double daylen = spec.sunset_hour - spec.sunrise_hour;
  const double half_window = daylen * 8.0 / 14.0;  // east-morning / west-afternoon span
  std::vector<WeatherSample> out(static_cast<size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double h = std::fmod(k * dt / 3600.0, 24.0);
    WeatherSample& w = out[static_cast<size_t>(k)];
    w.t_out = spec.t_mean + spec.t_amp * std::cos(2 * M_PI * (h - spec.t_peak_hour) / 24.0);
    const double dl = (h >= spec.sunrise_hour && h <= spec.sunset_hour)
                          ? std::sin(M_PI * (h - spec.sunrise_hour) / daylen)
                          : 0.0;
    w.q_solar_wall[thermal::North] = spec.solar_wall_peak_n * dl;
    w.q_solar_wall[thermal::South] = spec.solar_wall_peak_s * dl;
    w.q_solar_wall[thermal::East] =
        (h >= spec.sunrise_hour && h <= spec.sunrise_hour + half_window)
            ? spec.solar_wall_peak_e * std::sin(M_PI * (h - spec.sunrise_hour) / half_window)
            : 0.0;
    w.q_solar_wall[thermal::West] =
        (h >= spec.sunset_hour - half_window && h <= spec.sunset_hour)
            ? spec.solar_wall_peak_w *
                  std::sin(M_PI * (h - (spec.sunset_hour - half_window)) / half_window)
            : 0.0;
    w.q_solar_zone = spec.solar_zone_peak * dl;
    w.q_internal = loads.internal_gain_w(sched.occupied_at_hour(h));
  }
  return out;
}

std::vector<WeatherSample> load_weather_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError("cannot open weather file: " + path);
  std::string line;
  if (!std::getline(f, line)) throw ScenarioError("empty weather file: " + path);
  std::vector<WeatherSample> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw ScenarioError("weather row needs 8 columns: " + line);
    WeatherSample w;
    w.t_out = std::stod(cells[1]);
    w.q_solar_wall[thermal::North] = std::stod(cells[2]);
    w.q_solar_wall[thermal::East] = std::stod(cells[3]);
    w.q_solar_wall[thermal::West] = std::stod(cells[4]);
    w.q_solar_wall[thermal::South] = std::stod(cells[5]);
    w.q_internal = std::stod(cells[6]);
    w.q_solar_zone = std::stod(cells[7]);
    out.push_back(w);
  }
  return out;
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::DistributedPwa: return "distributed-pwa";
    case Strategy::CentralizedPwa: return "centralized-pwa";
    case Strategy::CentralizedLinear: return "centralized-linear";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(const std::string& name) {
  if (name == "distributed-pwa") return Strategy::DistributedPwa;
  if (name == "centralized-pwa") return Strategy::CentralizedPwa;
  if (name == "centralized-linear") return Strategy::CentralizedLinear;
  return std::nullopt;
}

std::vector<std::string> strategy_names() {
  return {"distributed-pwa", "centralized-pwa", "centralized-linear"};
}

comfort::ComfortParams Scenario::comfort_params() const {
  if (season == "summer") return comfort::ComfortParams::summer();
  if (season == "winter") return comfort::ComfortParams::winter();
  throw ScenarioError("unknown season: " + season);
}

void Scenario::validate() const {
  topology.validate();
  zone_params.validate();
  mpc.validate();
  schedules.validate();
  comfort_params().validate();
  if (steps < mpc.N) throw ScenarioError("scenario: duration must cover one horizon");
  if (plant_mismatch < 0 || plant_mismatch >= 1) {
    throw ScenarioError("scenario: plant_mismatch must lie in [0, 1)");
  }
}

// ---------------------------------------------------------------------------
// Scenario JSON

using json = nlohmann::ordered_json;

std::string Scenario::to_json() const {
  json j;
  j["topology"] = {{"floors", topology.floors}, {"zones_per_floor", topology.zones_per_floor}};
  j["zone_params"] = {
      {"C_z", zone_params.C_z},
      {"C_w", zone_params.C_w},
      {"R_in", zone_params.R_in},
      {"R_cond", zone_params.R_cond},
      {"R_out", zone_params.R_out},
  };
  j["season"] = season;
  j["mpc"] = {{"N", mpc.N},           {"alpha", mpc.alpha}, {"u_min_w", mpc.u_min_w},
              {"u_max_w", mpc.u_max_w}, {"c_max_w", mpc.c_max_w}, {"dt", mpc.dt}};
  j["admm"] = {{"rho", admm.rho},
               {"max_iter", admm.max_iter},
               {"explore_iters", admm.explore_iters},
               {"tol", admm.tol}};
  j["schedules"] = {{"band_end_hour", schedules.band_end_hour},
                    {"band_price", schedules.band_price},
                    {"occ_start_hour", schedules.occ_start_hour},
                    {"occ_end_hour", schedules.occ_end_hour}};
  j["weather"] = {{"t_mean", weather.t_mean},
                  {"t_amp", weather.t_amp},
                  {"t_peak_hour", weather.t_peak_hour},
                  {"solar_wall_peak_n", weather.solar_wall_peak_n},
                  {"solar_wall_peak_e", weather.solar_wall_peak_e},
                  {"solar_wall_peak_w", weather.solar_wall_peak_w},
                  {"solar_wall_peak_s", weather.solar_wall_peak_s},
                  {"solar_zone_peak", weather.solar_zone_peak},
                  {"sunrise_hour", weather.sunrise_hour},
                  {"sunset_hour", weather.sunset_hour}};
  j["weather_csv"] = weather_csv;
  j["loads"] = {{"area_m2", loads.area_m2},
                {"m2_per_occupant", loads.m2_per_occupant},
                {"occupant_w", loads.occupant_w},
                {"lighting_w_per_m2", loads.lighting_w_per_m2},
                {"equipment_w_per_m2", loads.equipment_w_per_m2}};
  j["pwa_domain"] = {pwa_domain.ta_lo, pwa_domain.ta_hi, pwa_domain.tr_lo, pwa_domain.tr_hi};
  j["steps"] = steps;
  j["x0_temp_c"] = x0_temp_c;
  j["plant_mismatch"] = plant_mismatch;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

Scenario Scenario::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ScenarioError(std::string("scenario parse error: ") + e.what());
  }
  Scenario s;  // defaults
  if (j.contains("topology")) {
    const auto& t = j["topology"];
    const int floors = t.value("floors", s.topology.floors);
    const int zpf = t.value("zones_per_floor", s.topology.zones_per_floor);
    if (zpf == 4) {
      s.topology = BuildingTopology::standard(floors);
    } else if (zpf == 1 && floors == 1) {
      s.topology = BuildingTopology::single_zone();
    } else {
      throw ScenarioError("topology: supported layouts are Fx4 or 1x1");
    }
  }
  if (j.contains("zone_params")) {
    const auto& z = j["zone_params"];
    auto arr4 = [&](const char* key, std::array<double, 4> def) {
      if (!z.contains(key)) return def;
      std::array<double, 4> out{};
      for (int i = 0; i < 4; ++i) out[static_cast<size_t>(i)] = z[key].at(i);
      return out;
    };
    s.zone_params.C_z = z.value("C_z", s.zone_params.C_z);
    s.zone_params.C_w = arr4("C_w", s.zone_params.C_w);
    s.zone_params.R_in = arr4("R_in", s.zone_params.R_in);
    s.zone_params.R_cond = arr4("R_cond", s.zone_params.R_cond);
    s.zone_params.R_out = arr4("R_out", s.zone_params.R_out);
  }
  s.season = j.value("season", s.season);
  if (j.contains("mpc")) {
    const auto& m = j["mpc"];
    s.mpc.N = m.value("N", s.mpc.N);
    s.mpc.alpha = m.value("alpha", s.mpc.alpha);
    s.mpc.u_min_w = m.value("u_min_w", s.mpc.u_min_w);
    s.mpc.u_max_w = m.value("u_max_w", s.mpc.u_max_w);
    s.mpc.c_max_w = m.value("c_max_w", s.mpc.c_max_w);
    s.mpc.dt = m.value("dt", s.mpc.dt);
  }
  if (j.contains("admm")) {
    const auto& a = j["admm"];
    s.admm.rho = a.value("rho", s.admm.rho);
    s.admm.max_iter = a.value("max_iter", s.admm.max_iter);
    s.admm.explore_iters = a.value("explore_iters", s.admm.explore_iters);
    s.admm.tol = a.value("tol", s.admm.tol);
  }
  if (j.contains("schedules")) {
    const auto& sc = j["schedules"];
    s.schedules.band_end_hour =
        sc.value("band_end_hour", s.schedules.band_end_hour);
    s.schedules.band_price = sc.value("band_price", s.schedules.band_price);
    s.schedules.occ_start_hour = sc.value("occ_start_hour", s.schedules.occ_start_hour);
    s.schedules.occ_end_hour = sc.value("occ_end_hour", s.schedules.occ_end_hour);
  }
  if (j.contains("weather")) {
    const auto& w = j["weather"];
    s.weather.t_mean = w.value("t_mean", s.weather.t_mean);
    s.weather.t_amp = w.value("t_amp", s.weather.t_amp);
    s.weather.t_peak_hour = w.value("t_peak_hour", s.weather.t_peak_hour);
    s.weather.solar_wall_peak_n = w.value("solar_wall_peak_n", s.weather.solar_wall_peak_n);
    s.weather.solar_wall_peak_e = w.value("solar_wall_peak_e", s.weather.solar_wall_peak_e);
    s.weather.solar_wall_peak_w = w.value("solar_wall_peak_w", s.weather.solar_wall_peak_w);
    s.weather.solar_wall_peak_s = w.value("solar_wall_peak_s", s.weather.solar_wall_peak_s);
    s.weather.solar_zone_peak = w.value("solar_zone_peak", s.weather.solar_zone_peak);
    s.weather.sunrise_hour = w.value("sunrise_hour", s.weather.sunrise_hour);
    s.weather.sunset_hour = w.value("sunset_hour", s.weather.sunset_hour);
  }
  s.weather_csv = j.value("weather_csv", s.weather_csv);
  if (j.contains("loads")) {
    const auto& L = j["loads"];
    s.loads.area_m2 = L.value("area_m2", s.loads.area_m2);
    s.loads.m2_per_occupant = L.value("m2_per_occupant", s.loads.m2_per_occupant);
    s.loads.occupant_w = L.value("occupant_w", s.loads.occupant_w);
    s.loads.lighting_w_per_m2 = L.value("lighting_w_per_m2", s.loads.lighting_w_per_m2);
    s.loads.equipment_w_per_m2 = L.value("equipment_w_per_m2", s.loads.equipment_w_per_m2);
  }
  if (j.contains("pwa_domain")) {
    const auto& d = j["pwa_domain"];
    s.pwa_domain = {d.at(0), d.at(1), d.at(2), d.at(3)};
  }
  s.steps = j.value("steps", s.steps);
  s.x0_temp_c = j.value("x0_temp_c", s.x0_temp_c);
  s.plant_mismatch = j.value("plant_mismatch", s.plant_mismatch);
  s.seed = j.value("seed", s.seed);
  return s;
}

void Scenario::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ScenarioError("cannot write scenario file: " + path);
  f << to_json();
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ScenarioError("cannot read scenario file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Closed loop

namespace {

std::vector<thermal::DiscreteZoneModel> plant_models(const Scenario& sc) {
  const int M = sc.topology.zones();
  std::vector<thermal::DiscreteZoneModel> out;
  out.reserve(static_cast<size_t>(M));
  std::mt19937 rng(sc.seed);
  std::uniform_real_distribution<double> u(-sc.plant_mismatch, sc.plant_mismatch);
  for (int i = 0; i < M; ++i) {
    thermal::ZoneThermalParams p = sc.zone_params;
    if (sc.plant_mismatch > 0) {
      p.C_z *= 1 + u(rng);
      for (int o = 0; o < thermal::kOrientations; ++o) {
        p.C_w[static_cast<size_t>(o)] *= 1 + u(rng);
        p.R_in[static_cast<size_t>(o)] *= 1 + u(rng);
        p.R_cond[static_cast<size_t>(o)] *= 1 + u(rng);
        p.R_out[static_cast<size_t>(o)] *= 1 + u(rng);
      }
    }
    out.push_back(thermal::discretize(thermal::build_continuous(p), sc.mpc.dt, -1.0));
  }
  return out;
}

struct Quartiles {
  double mn = 0, q1 = 0, med = 0, q3 = 0, mx = 0;
};

Quartiles quartiles(std::vector<double> v) {
  Quartiles q;
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  const auto at = [&](double p) {
    const double idx = p * (static_cast<double>(v.size()) - 1);
    const size_t lo = static_cast<size_t>(std::floor(idx));
    const size_t hi = static_cast<size_t>(std::ceil(idx));
    return v[lo] + (idx - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.mn = v.front();
  q.q1 = at(0.25);
  q.med = at(0.5);
  q.q3 = at(0.75);
  q.mx = v.back();
  return q;
}

const std::array<double, thermal::kOrientations> kRadiantWeights = {0.25, 0.25, 0.25, 0.25};

}  // namespace

SimulationResult run_closed_loop(const Scenario& sc, Strategy strategy, int jobs) {
  sc.validate();
  const int M = sc.topology.zones();
  const int N = sc.mpc.N;
  const double dt = sc.mpc.dt;

  const comfort::PwaComfortModel pwa =
      comfort::fit_pwa(sc.comfort_params(), sc.pwa_domain,
                       0.5 * (sc.pwa_domain.ta_lo + sc.pwa_domain.ta_hi),
                       0.5 * (sc.pwa_domain.tr_lo + sc.pwa_domain.tr_hi));

  const thermal::DiscreteZoneModel predictor =
      thermal::discretize(thermal::build_continuous(sc.zone_params), dt, -1.0);
  const std::vector<thermal::DiscreteZoneModel> plants = plant_models(sc);

  std::vector<WeatherSample> weather;
  if (!sc.weather_csv.empty()) {
    weather = load_weather_csv(sc.weather_csv);
    if (static_cast<int>(weather.size()) < sc.steps + N) {
      throw ScenarioError("weather file too short: need steps + horizon rows");
    }
  } else {
    weather = synth_weather(sc.weather, sc.loads, sc.schedules, sc.steps + N, dt);
  }

  std::vector<thermal::ZoneState> x(static_cast<size_t>(M),
                                    thermal::ZoneState::uniform(sc.x0_temp_c));
  std::vector<Eigen::VectorXd> prev_u(static_cast<size_t>(M),
                                      Eigen::VectorXd::Constant(N, sc.mpc.u_min_w / 1000.0));
  bool have_prev = false;

  SimulationResult res;
  res.trace.dt = dt;
  res.trace.strategy = strategy_name(strategy);
  res.trace.seed = sc.seed;
  res.metrics.strategy = strategy_name(strategy);

  std::vector<double> occupied_pmv;
  double power_sum = 0;

  for (int k = 0; k < sc.steps; ++k) {
    std::vector<double> tz_now(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) tz_now[static_cast<size_t>(i)] = x[static_cast<size_t>(i)].T_z();

    std::vector<mpc::ZoneHorizon> horizons(static_cast<size_t>(M));
    std::vector<thermal::DisturbanceSample> first_dist(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) {
      std::vector<thermal::DisturbanceSample> dists(static_cast<size_t>(N));
      for (int l = 0; l < N; ++l) {
        const WeatherSample& w = weather[static_cast<size_t>(k + l)];
        thermal::DisturbanceSample d;
        d.T_out_env = w.t_out;
        for (int o = 0; o < thermal::kOrientations; ++o) {
          const int nb = sc.topology.adjacency[static_cast<size_t>(i)][static_cast<size_t>(o)];
          if (nb >= 0) {
            d.T_neighbor[static_cast<size_t>(o)] = tz_now[static_cast<size_t>(nb)];
          } else {
            d.Q_rad_wall[static_cast<size_t>(o)] = w.q_solar_wall[static_cast<size_t>(o)];
          }
        }
        d.Q_internal = w.q_internal;
        d.Q_rad_zone = w.q_solar_zone;
        dists[static_cast<size_t>(l)] = d;
      }
      first_dist[static_cast<size_t>(i)] = dists[0];
      horizons[static_cast<size_t>(i)] = mpc::make_horizon(predictor, x[static_cast<size_t>(i)].x, dists);
    }

    const std::vector<double> tariff = sc.schedules.tariff_horizon(k, N, dt);
    const std::vector<double> occ = sc.schedules.occupancy_horizon(k, N, dt);

    std::vector<Eigen::VectorXd> warm(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) {
      Eigen::VectorXd w0 = prev_u[static_cast<size_t>(i)];
      if (have_prev) {
        // Shift the previous solution; hold the last input at the tail.
        Eigen::VectorXd shifted(N);
        shifted.head(N - 1) = w0.tail(N - 1);
        shifted(N - 1) = w0(N - 1);
        w0 = shifted;
      }
      warm[static_cast<size_t>(i)] =
          w0.cwiseMax(sc.mpc.u_min_w / 1000.0).cwiseMin(sc.mpc.u_max_w / 1000.0);
    }

    mpc::SolveReport rep;
    switch (strategy) {
      case Strategy::DistributedPwa:
        rep = mpc::solve_convex_admm(horizons, pwa, sc.mpc, sc.admm, tariff, occ, warm, jobs);
        break;
      case Strategy::CentralizedPwa:
        rep = mpc::solve_centralized_pwa(horizons, pwa, sc.mpc, tariff, occ, warm);
        break;
      case Strategy::CentralizedLinear:
        rep = mpc::solve_centralized_linear(horizons, pwa, sc.mpc, tariff, occ, warm);
        break;
    }
    prev_u = rep.u_star;
    have_prev = true;

    StepRecord step;
    step.step = k;
    step.hour = std::fmod(k * dt / 3600.0, 24.0);
    step.tariff = tariff[0];
    step.occupied = occ[0] > 0 ? 1 : 0;
    step.admm_iterations = rep.admm_iterations;
    step.restarts = rep.restarts;
    step.degraded = rep.degraded ? 1 : 0;
    step.zones.resize(static_cast<size_t>(M));

    for (int i = 0; i < M; ++i) {
      const double u_w = rep.u_star[static_cast<size_t>(i)](0) * 1000.0;
      x[static_cast<size_t>(i)] = thermal::step(plants[static_cast<size_t>(i)],
                                                x[static_cast<size_t>(i)], u_w,
                                                first_dist[static_cast<size_t>(i)]);
      ZoneStepRecord& z = step.zones[static_cast<size_t>(i)];
      z.u_w = u_w;
      z.t_z = x[static_cast<size_t>(i)].T_z();
      z.t_r = x[static_cast<size_t>(i)].mean_radiant(kRadiantWeights);
      z.pmv_exact = comfort::pmv_exact({z.t_z, z.t_r}, pwa.params);
      z.pmv_pwa = comfort::pmv_pwa(pwa, {z.t_z, z.t_r}).pmv_hat;
      z.region = rep.active_regions[static_cast<size_t>(i)][0];
      z.local_cost_cny = step.tariff * u_w * dt / 3.6e6;
      step.sum_u_w += u_w;
      power_sum += u_w;
      if (step.occupied) occupied_pmv.push_back(z.pmv_exact);
    }
    step.energy_cost_cny = step.tariff * step.sum_u_w * dt / 3.6e6;

    res.metrics.total_cost_cny += step.energy_cost_cny;
    res.metrics.wall_seconds += rep.wall_seconds;
    res.metrics.max_sequential_seconds += rep.max_sequential_seconds;
    res.metrics.degraded_steps += step.degraded;
    res.metrics.total_admm_iterations += rep.admm_iterations;
    res.metrics.max_budget_violation_w =
        std::max(res.metrics.max_budget_violation_w, step.sum_u_w - sc.mpc.budget_w(M));

    res.trace.steps.push_back(std::move(step));
  }

  res.metrics.avg_power_w = power_sum / (static_cast<double>(sc.steps) * M);
  const Quartiles q = quartiles(occupied_pmv);
  res.metrics.pmv_min = q.mn;
  res.metrics.pmv_q1 = q.q1;
  res.metrics.pmv_median = q.med;
  res.metrics.pmv_q3 = q.q3;
  res.metrics.pmv_max = q.mx;
  return res;
}

MetricsReport metrics_from_trace(const SimulationTrace& trace, const Scenario& scenario) {
  MetricsReport m;
  m.strategy = trace.strategy;
  std::vector<double> occupied_pmv;
  double power_sum = 0;
  long count = 0;
  const int M = scenario.topology.zones();
  for (const StepRecord& s : trace.steps) {
    m.total_cost_cny += s.energy_cost_cny;
    m.degraded_steps += s.degraded;
    m.total_admm_iterations += s.admm_iterations;
    m.max_budget_violation_w =
        std::max(m.max_budget_violation_w, s.sum_u_w - scenario.mpc.budget_w(M));
    for (const ZoneStepRecord& z : s.zones) {
      power_sum += z.u_w;
      ++count;
      if (s.occupied) occupied_pmv.push_back(z.pmv_exact);
    }
  }
  m.avg_power_w = count ? power_sum / static_cast<double>(count) : 0;
  const Quartiles q = quartiles(occupied_pmv);
  m.pmv_min = q.mn;
  m.pmv_q1 = q.q1;
  m.pmv_median = q.med;
  m.pmv_q3 = q.q3;
  m.pmv_max = q.mx;
  return m;
}

std::string MetricsReport::to_json() const {
  json j;
  j["strategy"] = strategy;
  j["avg_power_w"] = avg_power_w;
  j["total_cost_cny"] = total_cost_cny;
  j["pmv_occupied"] = {{"min", pmv_min}, {"q1", pmv_q1}, {"median", pmv_median},
                       {"q3", pmv_q3},   {"max", pmv_max}};
  j["wall_seconds"] = wall_seconds;
  j["max_sequential_seconds"] = max_sequential_seconds;
  j["degraded_steps"] = degraded_steps;
  j["total_admm_iterations"] = total_admm_iterations;
  j["max_budget_violation_w"] = max_budget_violation_w;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Trace persistence. Timings are deliberately kept out of the trace so that
// repeated runs with identical seeds produce byte-identical files.

void write_trace_csv(const SimulationTrace& trace, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ScenarioError("cannot write trace file: " + path);
  f << "step,zone,hour,tariff,occupied,T_z,T_r,u_W,pmv_exact,pmv_pwa,region,"
       "local_cost_CNY,sum_u_W,energy_cost_CNY,admm_iterations,restarts,degraded\n";
  for (const StepRecord& s : trace.steps) {
    for (size_t i = 0; i < s.zones.size(); ++i) {
      const ZoneStepRecord& z = s.zones[i];
      f << s.step << ',' << i << ',' << fmt(s.hour) << ',' << fmt(s.tariff) << ','
        << s.occupied << ',' << fmt(z.t_z) << ',' << fmt(z.t_r) << ',' << fmt(z.u_w) << ','
        << fmt(z.pmv_exact) << ',' << fmt(z.pmv_pwa) << ',' << z.region << ','
        << fmt(z.local_cost_cny) << ',' << fmt(s.sum_u_w) << ',' << fmt(s.energy_cost_cny)
        << ',' << s.admm_iterations << ',' << s.restarts << ',' << s.degraded << '\n';
    }
  }
}

SimulationTrace read_trace_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError("cannot read trace file: " + path);
  std::string line;
  if (!std::getline(f, line)) throw ScenarioError("empty trace file: " + path);
  SimulationTrace trace;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> c;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    if (c.size() != 17) throw ScenarioError("trace row needs 17 columns: " + line);
    const int step = std::stoi(c[0]);
    if (trace.steps.empty() || trace.steps.back().step != step) {
      StepRecord s;
      s.step = step;
      s.hour = std::stod(c[2]);
      s.tariff = std::stod(c[3]);
      s.occupied = std::stoi(c[4]);
      s.sum_u_w = std::stod(c[12]);
      s.energy_cost_cny = std::stod(c[13]);
      s.admm_iterations = std::stoi(c[14]);
      s.restarts = std::stoi(c[15]);
      s.degraded = std::stoi(c[16]);
      trace.steps.push_back(s);
    }
    ZoneStepRecord z;
    z.t_z = std::stod(c[5]);
    z.t_r = std::stod(c[6]);
    z.u_w = std::stod(c[7]);
    z.pmv_exact = std::stod(c[8]);
    z.pmv_pwa = std::stod(c[9]);
    z.region = std::stoi(c[10]);
    z.local_cost_cny = std::stod(c[11]);
    trace.steps.back().zones.push_back(z);
  }
  return trace;
}

void write_plot_csv(const SimulationTrace& trace, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ScenarioError("cannot write plot file: " + path);
  f << "step,hour,zone,T_z,pmv,u_W\n";
  for (const StepRecord& s : trace.steps) {
    for (size_t i = 0; i < s.zones.size(); ++i) {
      const ZoneStepRecord& z = s.zones[i];
      f << s.step << ',' << fmt(s.hour) << ',' << i << ',' << fmt(z.t_z) << ','
        << fmt(z.pmv_exact) << ',' << fmt(z.u_w) << '\n';
    }
  }
}

std::vector<MetricsReport> compare_strategies(const Scenario& scenario,
                                              const std::vector<Strategy>& strategies,
                                              int jobs) {
  if (strategies.size() < 2) throw ScenarioError("compare: need at least two strategies");
  std::vector<MetricsReport> rows;
  rows.reserve(strategies.size());
  for (Strategy s : strategies) {
    rows.push_back(run_closed_loop(scenario, s, jobs).metrics);
  }
  return rows;
}

void write_comparison_csv(const std::vector<MetricsReport>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ScenarioError("cannot write comparison file: " + path);
  f << "strategy,avg_power_W,total_cost_CNY,pmv_min,pmv_q1,pmv_median,pmv_q3,pmv_max,"
       "wall_s,max_sequential_s,degraded_steps\n";
  for (const MetricsReport& m : rows) {
    f << m.strategy << ',' << fmt(m.avg_power_w) << ',' << fmt(m.total_cost_cny) << ','
      << fmt(m.pmv_min) << ',' << fmt(m.pmv_q1) << ',' << fmt(m.pmv_median) << ','
      << fmt(m.pmv_q3) << ',' << fmt(m.pmv_max) << ',' << fmt(m.wall_seconds) << ','
      << fmt(m.max_sequential_seconds) << ',' << m.degraded_steps << '\n';
  }
}

}  // namespace dmpc::sim
