#include "dmpc/thermal.hpp"

#include "dmpc/matexp.hpp"

namespace dmpc::thermal {

void ZoneThermalParams::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0)) throw ParameterError(std::string("non-positive thermal parameter: ") + name);
  };
  check(C_z, "C_z");
  for (int o = 0; o < kOrientations; ++o) {
    check(C_w[o], "C_w");
    check(R_in[o], "R_in");
    check(R_cond[o], "R_cond");
    check(R_out[o], "R_out");
  }
}

ZoneThermalParams ZoneThermalParams::reference() {
  ZoneThermalParams p;
  p.C_z = 4.8e4;
  p.C_w = {8.5e5, 1.1e6, 1.1e6, 8.5e5};          // n, e, w, s
  p.R_in = {0.0310, 0.0232, 0.0232, 0.0310};
  p.R_cond = {0.0238, 0.0179, 0.0179, 0.0238};
  p.R_out = {0.0116, 0.0087, 0.0087, 0.0116};
  return p;
}

Eigen::Matrix<double, 10, 1> DisturbanceSample::raw() const {
  Eigen::Matrix<double, 10, 1> w;
  for (int o = 0; o < kOrientations; ++o) {
    w(o) = boundary_temp(static_cast<Orientation>(o));
    w(kOrientations + o) = Q_rad_wall[o];
  }
  w(8) = Q_internal;
  w(9) = Q_rad_zone;
  return w;
}

ContinuousZoneModel build_continuous(const ZoneThermalParams& params) {
  params.validate();
  ContinuousZoneModel m;
  m.params = params;
  m.Abar.setZero();
  m.Bbar.setZero();
  m.E.setZero();

  // Zone air node: C_z T_z' = sum_ori (T_wi - T_z)/R_in + u + Q_in + Q_rad_z
  for (int o = 0; o < kOrientations; ++o) {
    const double k = 1.0 / (params.C_z * params.R_in[o]);
    m.Abar(0, 0) -= k;
    m.Abar(0, 1 + o) += k;
  }
  m.Bbar(0) = 1.0 / params.C_z;
  m.E(0, 8) = 1.0 / params.C_z;
  m.E(0, 9) = 1.0 / params.C_z;

  for (int o = 0; o < kOrientations; ++o) {
    const int wi = 1 + o;
    const int wo = 5 + o;
    const double kin = 1.0 / (params.C_w[o] * params.R_in[o]);
    const double kc = 1.0 / (params.C_w[o] * params.R_cond[o]);
    const double kout = 1.0 / (params.C_w[o] * params.R_out[o]);
    // Inner surface: C_w T_wi' = (T_z - T_wi)/R_in + (T_wo - T_wi)/R_cond
    m.Abar(wi, 0) = kin;
    m.Abar(wi, wi) = -kin - kc;
    m.Abar(wi, wo) = kc;
    // Outer surface: C_w T_wo' = (T_b - T_wo)/R_out + (T_wi - T_wo)/R_cond + Q_rad
    m.Abar(wo, wi) = kc;
    m.Abar(wo, wo) = -kc - kout;
    m.E(wo, o) = kout;
    m.E(wo, kOrientations + o) = 1.0 / params.C_w[o];
  }
  return m;
}

DiscreteZoneModel discretize(const ContinuousZoneModel& cont, double dt, double input_sign) {
  if (!(dt > 0)) throw ParameterError("discretize: dt must be positive");
  const ZohPair z = zoh(cont.Abar, dt);
  DiscreteZoneModel m;
  m.A = z.Ad;
  m.B = z.S * cont.Bbar;
  m.Ed = z.S * cont.E;
  m.dt = dt;
  m.input_sign = input_sign;
  return m;
}

ZoneState step(const DiscreteZoneModel& model, const ZoneState& x, double u,
               const DisturbanceSample& dist) {
  ZoneState out;
  out.x = model.A * x.x + model.B * (model.input_sign * u) + model.d(dist);
  return out;
}

HorizonPrediction condense(const DiscreteZoneModel& model,
                           const std::vector<DisturbanceSample>& dists) {
  const int N = static_cast<int>(dists.size());
  if (N == 0) throw ParameterError("condense: need at least one disturbance sample");
  HorizonPrediction h;
  h.N = N;
  h.Phi.resize(kStateDim * N, kStateDim);
  h.Gamma.setZero(kStateDim * N, N);
  h.offset.resize(kStateDim * N);

  Eigen::Matrix<double, kStateDim, kStateDim> Ak =
      Eigen::Matrix<double, kStateDim, kStateDim>::Identity();
  Eigen::Matrix<double, kStateDim, 1> acc = Eigen::Matrix<double, kStateDim, 1>::Zero();
  const Eigen::Matrix<double, kStateDim, 1> Bs = model.B * model.input_sign;
  for (int l = 0; l < N; ++l) {
    acc = model.A * acc + model.d(dists[l]);
    if (l > 0) {
      h.Gamma.middleRows(kStateDim * l, kStateDim).leftCols(l) =
          model.A * h.Gamma.middleRows(kStateDim * (l - 1), kStateDim).leftCols(l);
    }
    h.Gamma.block<kStateDim, 1>(kStateDim * l, l) = Bs;
    Ak = model.A * Ak;
    h.Phi.middleRows(kStateDim * l, kStateDim) = Ak;
    h.offset.segment(kStateDim * l, kStateDim) = acc;
  }
  return h;
}

}  // namespace dmpc::thermal
