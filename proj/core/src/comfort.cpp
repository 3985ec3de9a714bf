#include "dmpc/comfort.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace dmpc::comfort {

void ComfortParams::validate() const {
  if (!(M > 0)) throw ParameterError("ComfortParams: M must be positive");
  if (W < 0) throw ParameterError("ComfortParams: W must be nonnegative");
  if (I_cl < 0) throw ParameterError("ComfortParams: I_cl must be nonnegative");
  if (!(v_ar > 0)) throw ParameterError("ComfortParams: v_ar must be positive");
  if (Phi < 0 || Phi > 1) throw ParameterError("ComfortParams: Phi must be in [0,1]");
}

double f_cl(const ComfortParams& params) {
  if (params.I_cl < 0) throw ParameterError("f_cl: I_cl must be nonnegative");
  return params.I_cl <= 0.078 ? 1.00 + 1.290 * params.I_cl : 1.05 + 0.645 * params.I_cl;
}

double vapor_pressure(double t_a, double Phi) {
  return Phi * 6.1094 * std::exp(17.625 * t_a / (t_a + 243.04)) * 1e-3;
}

namespace {

double h_c_of(double t_cl, double t_a, double v_ar) {
  return std::max(2.38 * std::pow(std::abs(t_cl - t_a), 0.25), 12.1 * std::sqrt(v_ar));
}

double tcl_rhs(double t_cl, const PmvInputs& in, const ComfortParams& p, double fcl) {
  const double hc = h_c_of(t_cl, in.t_a, p.v_ar);
  return 35.7 - 0.0275 * (p.M - p.W) -
         p.I_cl * (3.96e-8 * fcl * (std::pow(t_cl + 273.0, 4) - std::pow(in.t_r + 273.0, 4)) +
                   fcl * hc * (t_cl - in.t_a));
}

}  // namespace

TclSolution solve_tcl(const PmvInputs& in, const ComfortParams& params) {
  const double fcl = f_cl(params);
  const double kTol = 1e-10;
  const int kMaxIter = 200;

  double t_cl = in.t_a;
  double residual = 0;
  for (int it = 1; it <= kMaxIter; ++it) {
    const double rhs = tcl_rhs(t_cl, in, params, fcl);
    residual = t_cl - rhs;
    if (std::abs(residual) < kTol) {
      return {t_cl, h_c_of(t_cl, in.t_a, params.v_ar), residual, it};
    }
    t_cl = 0.5 * t_cl + 0.5 * rhs;  // damping 0.5
  }

  // Bisection fallback: g(t) = t - rhs(t) is increasing in t.
  double lo = -40.0, hi = 100.0;
  double glo = lo - tcl_rhs(lo, in, params, fcl);
  double ghi = hi - tcl_rhs(hi, in, params, fcl);
  if (glo > 0 || ghi < 0) {
    throw NumericalError("solve_tcl: fixed point and bisection both failed", residual);
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = mid - tcl_rhs(mid, in, params, fcl);
    (g > 0 ? hi : lo) = mid;
  }
  t_cl = 0.5 * (lo + hi);
  residual = t_cl - tcl_rhs(t_cl, in, params, fcl);
  if (std::abs(residual) >= 1e-8) {
    throw NumericalError("solve_tcl: did not converge", residual);
  }
  return {t_cl, h_c_of(t_cl, in.t_a, params.v_ar), residual, kMaxIter};
}

double pmv_exact(const PmvInputs& in, const ComfortParams& p) {
  const double fcl = f_cl(p);
  const TclSolution s = solve_tcl(in, p);
  const double pa = vapor_pressure(in.t_a, p.Phi);
  const double mw = p.M - p.W;
  const double L = mw - 3.05 * (5.733 - 0.007 * mw - pa) - 0.42 * (mw - 58.15) -
                   0.0173 * p.M * (5.867 - pa) - 0.0014 * p.M * (34.0 - in.t_a) -
                   3.96e-8 * fcl *
                       (std::pow(s.t_cl + 273.0, 4) - std::pow(in.t_r + 273.0, 4)) -
                   fcl * s.h_c * (s.t_cl - in.t_a);
  return (0.303 * std::exp(-0.036 * p.M) + 0.028) * L;
}

void PwaComfortModel::affine_coeffs(int r, double& ca, double& cr, double& c0) const {
  const PwaRegion& reg = regions[static_cast<size_t>(r)];
  ca = pmv.c_pa * params.Phi * pmv.pa_slope + pmv.c_ta + pmv.c_tcl * reg.a1;
  cr = pmv.c_tcl * reg.a2;
  c0 = pmv.c_pa * params.Phi * pmv.pa_offset + pmv.c_tcl * reg.a3 + pmv.c_0;
}

PwaComfortModel fit_pwa(const ComfortParams& params, const Rect& domain, double split_ta,
                        double split_tr, const PwaFitOptions& opts) {
  params.validate();
  if (!(split_ta > domain.ta_lo && split_ta < domain.ta_hi && split_tr > domain.tr_lo &&
        split_tr < domain.tr_hi)) {
    throw ParameterError("fit_pwa: split point must be strictly inside the domain");
  }
  const Rect rects[4] = {
      {domain.ta_lo, split_ta, domain.tr_lo, split_tr},   // 0 LL
      {split_ta, domain.ta_hi, domain.tr_lo, split_tr},   // 1 LR
      {domain.ta_lo, split_ta, split_tr, domain.tr_hi},   // 2 UL
      {split_ta, domain.ta_hi, split_tr, domain.tr_hi},   // 3 UR
  };
  for (const Rect& r : rects) {
    if (r.width() < 0.5 || r.height() < 0.5) {
      throw ParameterError("fit_pwa: degenerate region (extent below 0.5 degC)");
    }
  }

  const auto target = opts.target ? opts.target : [&params](double ta, double tr) {
    return solve_tcl({ta, tr}, params).t_cl;
  };
  const int ns = opts.samples_per_axis;
  const int ne = opts.edge_samples;
  const int rows = 4 * ns * ns + 4 * ne;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, 12);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  int row = 0;
  for (int r = 0; r < 4; ++r) {
    const Rect& rc = rects[r];
    for (int i = 0; i < ns; ++i) {
      const double ta = rc.ta_lo + rc.width() * i / (ns - 1);
      for (int j = 0; j < ns; ++j) {
        const double tr = rc.tr_lo + rc.height() * j / (ns - 1);
        A(row, 3 * r + 0) = ta;
        A(row, 3 * r + 1) = tr;
        A(row, 3 * r + 2) = 1.0;
        b(row) = target(ta, tr);
        ++row;
      }
    }
  }
  // Soft continuity across the four internal edges.
  const double w = std::sqrt(opts.continuity_weight);
  struct Edge {
    int rA, rB;
    bool fixed_ta;  // edge at t_a = split (else t_r = split)
    double s0, s1;  // range of the free coordinate
  };
  const Edge edges[4] = {
      {0, 1, true, domain.tr_lo, split_tr},
      {2, 3, true, split_tr, domain.tr_hi},
      {0, 2, false, domain.ta_lo, split_ta},
      {1, 3, false, split_ta, domain.ta_hi},
  };
  for (const Edge& e : edges) {
    for (int i = 0; i < ne; ++i) {
      const double s = e.s0 + (e.s1 - e.s0) * i / (ne - 1);
      const double ta = e.fixed_ta ? split_ta : s;
      const double tr = e.fixed_ta ? s : split_tr;
      A(row, 3 * e.rA + 0) = w * ta;
      A(row, 3 * e.rA + 1) = w * tr;
      A(row, 3 * e.rA + 2) = w;
      A(row, 3 * e.rB + 0) = -w * ta;
      A(row, 3 * e.rB + 1) = -w * tr;
      A(row, 3 * e.rB + 2) = -w;
      ++row;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 12) throw ParameterError("fit_pwa: ill-conditioned fit (degenerate region)");
  const Eigen::VectorXd coef = qr.solve(b);

  PwaComfortModel model;
  model.domain = domain;
  model.split_ta = split_ta;
  model.split_tr = split_tr;
  model.params = params;
  for (int r = 0; r < 4; ++r) {
    model.regions[static_cast<size_t>(r)] = {rects[r], coef(3 * r), coef(3 * r + 1), coef(3 * r + 2)};
  }

  // Accuracy report on the uniform evaluation grid.
  PwaFitReport rep;
  rep.grid_size = opts.report_grid;
  rep.domain = domain;
  double sum = 0, mx = 0;
  for (int i = 0; i < opts.report_grid; ++i) {
    const double ta = domain.ta_lo + domain.width() * i / (opts.report_grid - 1);
    for (int j = 0; j < opts.report_grid; ++j) {
      const double tr = domain.tr_lo + domain.height() * j / (opts.report_grid - 1);
      const double err = std::abs(pmv_exact({ta, tr}, params) -
                                  pmv_pwa(model, {ta, tr}).pmv_hat);
      sum += err;
      mx = std::max(mx, err);
    }
  }
  rep.mae = sum / (opts.report_grid * opts.report_grid);
  rep.max_abs_err = mx;

  double gap = 0;
  const int ngap = 200;
  for (const Edge& e : edges) {
    for (int i = 0; i < ngap; ++i) {
      const double s = e.s0 + (e.s1 - e.s0) * i / (ngap - 1);
      const double ta = e.fixed_ta ? split_ta : s;
      const double tr = e.fixed_ta ? s : split_tr;
      gap = std::max(gap, std::abs(model.regions[static_cast<size_t>(e.rA)].tcl_hat(ta, tr) -
                                   model.regions[static_cast<size_t>(e.rB)].tcl_hat(ta, tr)));
    }
  }
  rep.continuity_gap = gap;
  model.report = rep;
  return model;
}

PwaEval pmv_pwa(const PwaComfortModel& model, const PmvInputs& in) {
  const int r = model.region_of(in.t_a, in.t_r);
  double ca, cr, c0;
  model.affine_coeffs(r, ca, cr, c0);
  return {ca * in.t_a + cr * in.t_r + c0, r, !model.in_domain(in.t_a, in.t_r)};
}

double comfort_gap_bound(int N, double p_bar, double eps_max) {
  if (N < 0 || p_bar < 0 || eps_max < 0) {
    throw ParameterError("comfort_gap_bound: arguments must be nonnegative");
  }
  return 2.0 * N * p_bar * eps_max;
}

// ---------------------------------------------------------------------------
// Serialization

using json = nlohmann::ordered_json;

std::string PwaComfortModel::to_json() const {
  json j;
  j["domain"] = {domain.ta_lo, domain.ta_hi, domain.tr_lo, domain.tr_hi};
  j["split"] = {split_ta, split_tr};
  j["params"] = {{"M", params.M}, {"W", params.W}, {"I_cl", params.I_cl},
                 {"v_ar", params.v_ar}, {"Phi", params.Phi}};
  j["pmv_affine"] = {{"c_pa", pmv.c_pa}, {"c_ta", pmv.c_ta}, {"c_tcl", pmv.c_tcl},
                     {"c_0", pmv.c_0}, {"pa_slope", pmv.pa_slope}, {"pa_offset", pmv.pa_offset}};
  j["regions"] = json::array();
  for (const PwaRegion& r : regions) {
    j["regions"].push_back({{"bounds", {r.bounds.ta_lo, r.bounds.ta_hi, r.bounds.tr_lo, r.bounds.tr_hi}},
                            {"a1", r.a1}, {"a2", r.a2}, {"a3", r.a3}});
  }
  j["report"] = {{"mae", report.mae}, {"max_abs_err", report.max_abs_err},
                 {"grid_size", report.grid_size}, {"continuity_gap", report.continuity_gap}};
  return j.dump(2) + "\n";
}

PwaComfortModel PwaComfortModel::from_json(const std::string& text) {
  json j = json::parse(text);
  PwaComfortModel m;
  auto d = j.at("domain");
  m.domain = {d[0], d[1], d[2], d[3]};
  m.split_ta = j.at("split")[0];
  m.split_tr = j.at("split")[1];
  auto p = j.at("params");
  m.params = {p.at("M"), p.at("W"), p.at("I_cl"), p.at("v_ar"), p.at("Phi")};
  auto a = j.at("pmv_affine");
  m.pmv = {a.at("c_pa"), a.at("c_ta"), a.at("c_tcl"), a.at("c_0"),
           a.at("pa_slope"), a.at("pa_offset")};
  int i = 0;
  for (auto& rj : j.at("regions")) {
    auto bb = rj.at("bounds");
    m.regions[static_cast<size_t>(i++)] = {{bb[0], bb[1], bb[2], bb[3]},
                                           rj.at("a1"), rj.at("a2"), rj.at("a3")};
  }
  auto rep = j.at("report");
  m.report = {rep.at("mae"), rep.at("max_abs_err"), rep.at("grid_size"),
              m.domain, rep.at("continuity_gap")};
  return m;
}

void PwaComfortModel::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ScenarioError("cannot write comfort model file: " + path);
  f << to_json();
}

PwaComfortModel PwaComfortModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ScenarioError("cannot read comfort model file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

}  // namespace dmpc::comfort
