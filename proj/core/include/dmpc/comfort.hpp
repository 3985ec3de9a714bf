#pragma once

#include <array>
#include <functional>
#include <string>

#include "dmpc/errors.hpp"

namespace dmpc::comfort {

/// Personal / environmental parameters of the comfort index.
struct ComfortParams {
  double M = 60.0;       // metabolic rate, W/m^2 (1 met)
  double W = 0.0;        // mechanical work, W/m^2
  double I_cl = 0.0775;  // clothing resistance, m^2 K/W (0.5 clo)
  double v_ar = 0.1;     // relative air speed, m/s
  double Phi = 0.5;      // relative humidity, fraction

  void validate() const;

  static ComfortParams summer() { return {60.0, 0.0, 0.5 * 0.155, 0.1, 0.5}; }
  static ComfortParams winter() { return {60.0, 0.0, 0.155, 0.1, 0.5}; }
};

struct PmvInputs {
  double t_a;  // air temperature, degC
  double t_r;  // mean radiant temperature, degC
};

struct Rect {
  double ta_lo, ta_hi;
  double tr_lo, tr_hi;
  double width() const { return ta_hi - ta_lo; }
  double height() const { return tr_hi - tr_lo; }
};

/// One affine piece of the clothing-temperature surrogate:
///   tcl_hat = a1 t_a + a2 t_r + a3  on `bounds`.
struct PwaRegion {
  Rect bounds;
  double a1, a2, a3;
  double tcl_hat(double t_a, double t_r) const { return a1 * t_a + a2 * t_r + a3; }
};

struct PwaFitReport {
  double mae = 0;
  double max_abs_err = 0;
  int grid_size = 0;  // points per axis of the evaluation grid
  Rect domain{};
  double continuity_gap = 0;  // max cross-edge tcl_hat mismatch, degC
};

/// Fixed affine composition of the comfort surrogate. The coefficients are
/// part of the surrogate's published structure and are not refit.
struct PmvAffineCoefficients {
  double c_pa = 0.2551;
  double c_ta = 0.0052;
  double c_tcl = 0.8052;
  double c_0 = -25.2883;
  double pa_slope = 1.7833e-3;    // multiplies Phi * t_a
  double pa_offset = -12.7516e-3; // multiplies Phi
};

/// Four-region continuous piecewise-affine surrogate of the comfort index
/// over the (t_a, t_r) plane.
struct PwaComfortModel {
  Rect domain{};
  double split_ta = 26.0;
  double split_tr = 26.0;
  std::array<PwaRegion, 4> regions{};  // 0 LL, 1 LR, 2 UL, 3 UR
  PmvAffineCoefficients pmv{};
  ComfortParams params{};
  PwaFitReport report{};

  /// Region index containing (t_a, t_r). Ties break toward the lower-left
  /// region; points outside the domain map to the nearest region.
  int region_of(double t_a, double t_r) const {
    return (t_a <= split_ta ? 0 : 1) + (t_r <= split_tr ? 0 : 2);
  }
  bool in_domain(double t_a, double t_r) const {
    return t_a >= domain.ta_lo && t_a <= domain.ta_hi && t_r >= domain.tr_lo &&
           t_r <= domain.tr_hi;
  }
  /// Linearized vapor-pressure term.
  double pa_hat(double t_a) const {
    return params.Phi * (pmv.pa_slope * t_a + pmv.pa_offset);
  }
  /// Affine surrogate coefficients of region r:
  ///   pmv_hat = ca * t_a + cr * t_r + c0.
  void affine_coeffs(int r, double& ca, double& cr, double& c0) const;

  std::string to_json() const;
  static PwaComfortModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static PwaComfortModel load(const std::string& path);
};

struct PwaEval {
  double pmv_hat;
  int region;
  bool extrapolated;  // inputs were outside the fit domain
};

/// Clothing area factor (piecewise in I_cl).
double f_cl(const ComfortParams& params);

/// Water vapor partial pressure (kPa) from air temperature and humidity.
double vapor_pressure(double t_a, double Phi);

struct TclSolution {
  double t_cl;
  double h_c;
  double residual;
  int iterations;
};

/// Solves the implicit clothing-surface-temperature equation by damped
/// fixed-point iteration with a bisection fallback. Residual < 1e-8.
TclSolution solve_tcl(const PmvInputs& in, const ComfortParams& params);

/// Exact nonlinear comfort index.
double pmv_exact(const PmvInputs& in, const ComfortParams& params);

struct PwaFitOptions {
  int samples_per_axis = 25;     // in-region sample density
  double continuity_weight = 1e3;
  int edge_samples = 50;
  int report_grid = 20;          // accuracy-evaluation grid per axis
  /// Fit target override; defaults to the exact clothing temperature.
  std::function<double(double t_a, double t_r)> target;
};

/// Fits the four-region surrogate by per-region least squares on exact
/// clothing temperatures with a soft cross-edge continuity penalty.
PwaComfortModel fit_pwa(const ComfortParams& params, const Rect& domain = {22, 30, 22, 30},
                        double split_ta = 26.0, double split_tr = 26.0,
                        const PwaFitOptions& opts = {});

/// Evaluates the surrogate. Inputs outside the domain use the nearest
/// region and are flagged as extrapolated.
PwaEval pmv_pwa(const PwaComfortModel& model, const PmvInputs& in);

/// Bound on the comfort-cost change induced by a surrogate error of at
/// most eps_max when |PMV| <= p_bar over an N-step horizon: 2 N p_bar eps_max.
double comfort_gap_bound(int N, double p_bar, double eps_max);

}  // namespace dmpc::comfort
