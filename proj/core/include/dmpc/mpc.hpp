#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dmpc/admm.hpp"
#include "dmpc/comfort.hpp"
#include "dmpc/errors.hpp"
#include "dmpc/qp.hpp"
#include "dmpc/thermal.hpp"

namespace dmpc::mpc {

/// Horizon-level configuration. Powers are in W at this interface; the
/// optimization layers work in kW internally (see docs/units in README).
struct MpcConfig {
  int N = 12;              // horizon steps
  double alpha = 50.0;     // comfort weight
  double u_min_w = 0.0;    // per-zone input lower bound, W
  double u_max_w = 2000.0; // per-zone input upper bound, W
  double c_max_w = 0.0;    // shared per-step budget, W; 0 picks the default
  double dt = 900.0;       // seconds per step

  void validate() const;
  /// Effective budget: explicit value, or 0.8 * zones * u_max by default.
  double budget_w(int zones) const {
    return c_max_w > 0 ? c_max_w : 0.8 * zones * u_max_w;
  }
};

/// Daily tariff bands and occupancy window; horizons wrap modulo 24 h.
struct Schedules {
  std::vector<double> band_end_hour;  // ascending, last entry 24
  std::vector<double> band_price;     // CNY/kWh, one per band
  double occ_start_hour = 10.0;
  double occ_end_hour = 20.0;

  void validate() const;
  double tariff_at_hour(double h) const;
  bool occupied_at_hour(double h) const {
    const double hh = std::fmod(std::fmod(h, 24.0) + 24.0, 24.0);
    return hh >= occ_start_hour && hh < occ_end_hour;
  }
  std::vector<double> tariff_horizon(int k0, int N, double dt) const;
  std::vector<double> occupancy_horizon(int k0, int N, double dt) const;

  /// Six-band time-of-use tariff and the 10:00-20:00 occupancy window.
  static Schedules standard();
};

/// Condensed per-zone horizon data with the input map rescaled to kW.
struct ZoneHorizon {
  Eigen::MatrixXd Gamma_kw;   // 9N x N, state response per kW of input
  Eigen::VectorXd free_resp;  // 9N, Phi x0 + offset
  int N = 0;

  /// Predicted (t_a, t_r) at horizon step l under input u (kW).
  void operating_point(const Eigen::VectorXd& u, int l, double& t_a, double& t_r) const;
};

ZoneHorizon make_horizon(const thermal::DiscreteZoneModel& model, const thermal::StateVec& x0,
                         const std::vector<thermal::DisturbanceSample>& dists);

/// Condensed quadratic cost of one zone for a fixed region assignment:
///   J(u) = 1/2 u'Hu + g'u + c0 = alpha sum_l occ(l) pmv_tilde_l(u)^2
///                                + sum_l tariff(l) u(l)^2.
struct ZoneSubproblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double c0 = 0;
  Eigen::VectorXd lo, hi;                  // kW
  std::vector<int> active_regions;         // per step
  qp::Polyhedron omega;                    // active-region half-planes in u
  std::vector<Eigen::VectorXd> pmv_rows;   // pmv_tilde_l = row . u + offset_l
  Eigen::VectorXd pmv_offset;
  bool extrapolated = false;               // some step left the PWA domain

  double objective(const Eigen::VectorXd& u) const {
    return 0.5 * u.dot(H * u) + g.dot(u) + c0;
  }
};

/// Regions activated by the trajectory predicted under u_ref (kW).
std::vector<int> detect_regions(const ZoneHorizon& hz, const comfort::PwaComfortModel& pwa,
                                const Eigen::VectorXd& u_ref);

ZoneSubproblem build_subproblem(const ZoneHorizon& hz, const comfort::PwaComfortModel& pwa,
                                const Eigen::VectorXd& u_ref_kw, const MpcConfig& cfg,
                                const std::vector<double>& tariff,
                                const std::vector<double>& occupancy);

/// Like build_subproblem but with an explicit region assignment.
ZoneSubproblem build_subproblem_for_regions(const ZoneHorizon& hz,
                                            const comfort::PwaComfortModel& pwa,
                                            const std::vector<int>& regions,
                                            const MpcConfig& cfg,
                                            const std::vector<double>& tariff,
                                            const std::vector<double>& occupancy);

struct SolveReport {
  std::vector<Eigen::VectorXd> u_star;     // kW
  double objective = 0;
  int admm_iterations = 0;
  int restarts = 0;
  int region_switch_count = 0;
  double wall_seconds = 0;
  double max_sequential_seconds = 0;       // slowest-zone convention
  std::vector<double> interior_margins;    // per zone, degC scale
  std::vector<std::vector<int>> active_regions;
  std::vector<double> r_history;
  bool degraded = false;                   // non-interior exit or cycle
};

/// Distributed strategy: consensus iteration with subregion exploration for
/// the first explore_iters iterations, then a frozen convex tail, an
/// interior check against the active-region polyhedra, and up to 3 restarts.
SolveReport solve_convex_admm(const std::vector<ZoneHorizon>& zones,
                              const comfort::PwaComfortModel& pwa, const MpcConfig& cfg,
                              const admm::AdmmConfig& admm_cfg,
                              const std::vector<double>& tariff,
                              const std::vector<double>& occupancy,
                              const std::vector<Eigen::VectorXd>& warm_kw, int jobs = 1,
                              const admm::IterationLog& log = {});

/// Centralized strategy with region re-detection: one stacked QP over all
/// zones with explicit budget rows, re-linearized until the region
/// assignment is stationary (cap 20 passes; cycles return the best iterate).
SolveReport solve_centralized_pwa(const std::vector<ZoneHorizon>& zones,
                                  const comfort::PwaComfortModel& pwa, const MpcConfig& cfg,
                                  const std::vector<double>& tariff,
                                  const std::vector<double>& occupancy,
                                  const std::vector<Eigen::VectorXd>& warm_kw);

/// Centralized strategy with one global affine comfort model (the region
/// containing the domain center), no re-detection.
SolveReport solve_centralized_linear(const std::vector<ZoneHorizon>& zones,
                                     const comfort::PwaComfortModel& pwa, const MpcConfig& cfg,
                                     const std::vector<double>& tariff,
                                     const std::vector<double>& occupancy,
                                     const std::vector<Eigen::VectorXd>& warm_kw);

}  // namespace dmpc::mpc
