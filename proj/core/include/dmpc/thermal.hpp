#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dmpc/errors.hpp"

namespace dmpc::thermal {

/// Wall orientations, in the fixed state-vector order.
enum Orientation : int { North = 0, East = 1, West = 2, South = 3 };
inline constexpr int kOrientations = 4;
inline constexpr int kStateDim = 9;  // [T_z, T_wi(n,e,w,s), T_wo(n,e,w,s)]

using StateVec = Eigen::Matrix<double, kStateDim, 1>;

/// Lumped RC parameters of one zone. Resistances in K/W, capacities in J/K.
struct ZoneThermalParams {
  double C_z;                                   // zone air heat capacity
  std::array<double, kOrientations> C_w;        // wall heat capacity
  std::array<double, kOrientations> R_in;       // inner-surface convection
  std::array<double, kOrientations> R_cond;     // wall conduction
  std::array<double, kOrientations> R_out;      // outer-surface convection

  /// Throws ParameterError unless every value is strictly positive.
  void validate() const;

  /// Defaults from the reference office zone (exterior-wall construction).
  static ZoneThermalParams reference();
};

/// Zone state with named accessors over the fixed 9-vector ordering.
struct ZoneState {
  StateVec x = StateVec::Zero();

  double T_z() const { return x(0); }
  double T_wi(Orientation o) const { return x(1 + o); }
  double T_wo(Orientation o) const { return x(5 + o); }
  double& T_z() { return x(0); }
  double& T_wi(Orientation o) { return x(1 + o); }
  double& T_wo(Orientation o) { return x(5 + o); }

  /// Mean radiant temperature as a weighted sum of inner surface temperatures.
  double mean_radiant(const std::array<double, kOrientations>& w) const {
    double t = 0;
    for (int o = 0; o < kOrientations; ++o) t += w[o] * x(1 + o);
    return t;
  }

  static ZoneState uniform(double temp) {
    ZoneState s;
    s.x.setConstant(temp);
    return s;
  }
};

/// Exogenous inputs over one control step. Each orientation resolves to
/// exactly one boundary temperature: a neighbor-zone air temperature when
/// set, the outdoor ambient otherwise.
struct DisturbanceSample {
  double T_out_env = 0;                                          // degC
  std::array<std::optional<double>, kOrientations> T_neighbor{}; // degC
  std::array<double, kOrientations> Q_rad_wall{};                // W
  double Q_internal = 0;                                         // W
  double Q_rad_zone = 0;                                         // W

  double boundary_temp(Orientation o) const {
    return T_neighbor[o] ? *T_neighbor[o] : T_out_env;
  }

  /// Raw linear form: [T_b(n,e,w,s), Q_rad_wall(n,e,w,s), Q_internal, Q_rad_zone].
  Eigen::Matrix<double, 10, 1> raw() const;
};

/// Continuous-time model x' = Abar x + Bbar u + E w, with w the raw
/// disturbance vector of DisturbanceSample.
struct ContinuousZoneModel {
  Eigen::Matrix<double, kStateDim, kStateDim> Abar;
  Eigen::Matrix<double, kStateDim, 1> Bbar;
  Eigen::Matrix<double, kStateDim, 10> E;
  ZoneThermalParams params;

  Eigen::Matrix<double, kStateDim, 1> dbar(const DisturbanceSample& d) const {
    return E * d.raw();
  }
};

/// Exact zero-order-hold discretization of a ContinuousZoneModel.
/// step(): x+ = A x + B (input_sign * u) + Ed w.
struct DiscreteZoneModel {
  Eigen::Matrix<double, kStateDim, kStateDim> A;
  Eigen::Matrix<double, kStateDim, 1> B;
  Eigen::Matrix<double, kStateDim, 10> Ed;
  double dt = 0;            // seconds
  double input_sign = 1.0;  // +1 heating, -1 cooling

  Eigen::Matrix<double, kStateDim, 1> d(const DisturbanceSample& dist) const {
    return Ed * dist.raw();
  }
};

/// Stacked affine prediction over an N-step horizon:
///   X = Phi x0 + Gamma u + offset,  X = [x(1); ...; x(N)].
/// Gamma already carries the input sign.
struct HorizonPrediction {
  Eigen::MatrixXd Phi;     // 9N x 9
  Eigen::MatrixXd Gamma;   // 9N x N
  Eigen::VectorXd offset;  // 9N
  int N = 0;

  Eigen::VectorXd predict(const StateVec& x0, const Eigen::VectorXd& u) const {
    return Phi * x0 + Gamma * u + offset;
  }
  /// Row block of step l (l in [0, N)).
  auto block(int l) const { return Phi.middleRows(kStateDim * l, kStateDim); }
};

ContinuousZoneModel build_continuous(const ZoneThermalParams& params);

DiscreteZoneModel discretize(const ContinuousZoneModel& cont, double dt,
                             double input_sign = 1.0);

ZoneState step(const DiscreteZoneModel& model, const ZoneState& x, double u,
               const DisturbanceSample& dist);

HorizonPrediction condense(const DiscreteZoneModel& model,
                           const std::vector<DisturbanceSample>& dists);

}  // namespace dmpc::thermal
