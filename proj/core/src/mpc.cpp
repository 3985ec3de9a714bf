#include "dmpc/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

namespace dmpc::mpc {

namespace {
using clock_t_ = std::chrono::steady_clock;
double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}
constexpr double kWPerKw = 1000.0;
constexpr int kRestartCap = 3;
}  // namespace

void MpcConfig::validate() const {
  if (N < 1) throw ParameterError("MpcConfig: N must be >= 1");
  if (!(alpha >= 0)) throw ParameterError("MpcConfig: alpha must be nonnegative");
  if (!(0 <= u_min_w && u_min_w <= u_max_w)) {
    throw ParameterError("MpcConfig: need 0 <= u_min <= u_max");
  }
  if (!(dt > 0)) throw ParameterError("MpcConfig: dt must be positive");
}

void Schedules::validate() const {
  if (band_end_hour.empty() || band_end_hour.size() != band_price.size()) {
    throw ParameterError("Schedules: band arrays empty or mismatched");
  }
  if (band_end_hour.back() != 24.0) throw ParameterError("Schedules: last band must end at 24");
  for (size_t i = 0; i < band_end_hour.size(); ++i) {
    if (i > 0 && band_end_hour[i] <= band_end_hour[i - 1]) {
      throw ParameterError("Schedules: band ends must ascend");
    }
    if (!(band_price[i] > 0)) throw ParameterError("Schedules: prices must be positive");
  }
}

double Schedules::tariff_at_hour(double h) const {
  const double hh = std::fmod(std::fmod(h, 24.0) + 24.0, 24.0);
  for (size_t i = 0; i < band_end_hour.size(); ++i) {
    if (hh < band_end_hour[i]) return band_price[i];
  }
  return band_price.back();
}

std::vector<double> Schedules::tariff_horizon(int k0, int N, double dt) const {
  std::vector<double> out(static_cast<size_t>(N));
  for (int l = 0; l < N; ++l) {
    out[static_cast<size_t>(l)] = tariff_at_hour((k0 + l) * dt / 3600.0);
  }
  return out;
}

std::vector<double> Schedules::occupancy_horizon(int k0, int N, double dt) const {
  std::vector<double> out(static_cast<size_t>(N));
  for (int l = 0; l < N; ++l) {
    out[static_cast<size_t>(l)] = occupied_at_hour((k0 + l) * dt / 3600.0) ? 1.0 : 0.0;
  }
  return out;
}

Schedules Schedules::standard() {
  Schedules s;
  s.band_end_hour = {8, 14, 17, 19, 22, 24};
  s.band_price = {0.3358, 0.6629, 1.0881, 0.6629, 1.0881, 0.6629};
  return s;
}

void ZoneHorizon::operating_point(const Eigen::VectorXd& u, int l, double& t_a,
                                  double& t_r) const {
  const Eigen::VectorXd x = free_resp.segment(thermal::kStateDim * l, thermal::kStateDim) +
                            Gamma_kw.middleRows(thermal::kStateDim * l, thermal::kStateDim) * u;
  t_a = x(0);
  t_r = 0.25 * x.segment(1, 4).sum();
}

ZoneHorizon make_horizon(const thermal::DiscreteZoneModel& model, const thermal::StateVec& x0,
                         const std::vector<thermal::DisturbanceSample>& dists) {
  const thermal::HorizonPrediction p = thermal::condense(model, dists);
  ZoneHorizon hz;
  hz.N = p.N;
  hz.Gamma_kw = kWPerKw * p.Gamma;
  hz.free_resp = p.Phi * x0 + p.offset;
  return hz;
}

std::vector<int> detect_regions(const ZoneHorizon& hz, const comfort::PwaComfortModel& pwa,
                                const Eigen::VectorXd& u_ref) {
  std::vector<int> regions(static_cast<size_t>(hz.N));
  for (int l = 0; l < hz.N; ++l) {
    double ta, tr;
    hz.operating_point(u_ref, l, ta, tr);
    regions[static_cast<size_t>(l)] = pwa.region_of(ta, tr);
  }
  return regions;
}

ZoneSubproblem build_subproblem_for_regions(const ZoneHorizon& hz,
                                            const comfort::PwaComfortModel& pwa,
                                            const std::vector<int>& regions,
                                            const MpcConfig& cfg,
                                            const std::vector<double>& tariff,
                                            const std::vector<double>& occupancy) {
  cfg.validate();
  const int N = hz.N;
  if (static_cast<int>(regions.size()) != N || static_cast<int>(tariff.size()) != N ||
      static_cast<int>(occupancy.size()) != N) {
    throw ParameterError("build_subproblem: horizon length mismatch");
  }

  ZoneSubproblem sp;
  sp.active_regions = regions;
  sp.lo = Eigen::VectorXd::Constant(N, cfg.u_min_w / kWPerKw);
  sp.hi = Eigen::VectorXd::Constant(N, cfg.u_max_w / kWPerKw);
  sp.H = Eigen::MatrixXd::Zero(N, N);
  sp.g = Eigen::VectorXd::Zero(N);
  sp.pmv_rows.resize(static_cast<size_t>(N));
  sp.pmv_offset.resize(N);
  sp.omega.A = Eigen::MatrixXd::Zero(2 * N, N);
  sp.omega.b = Eigen::VectorXd::Zero(2 * N);

  for (int l = 0; l < N; ++l) {
    const int s = thermal::kStateDim * l;
    const Eigen::RowVectorXd g_ta = hz.Gamma_kw.row(s);
    const Eigen::RowVectorXd g_tr =
        0.25 * (hz.Gamma_kw.row(s + 1) + hz.Gamma_kw.row(s + 2) + hz.Gamma_kw.row(s + 3) +
                hz.Gamma_kw.row(s + 4));
    const double ta_free = hz.free_resp(s);
    const double tr_free = 0.25 * hz.free_resp.segment(s + 1, 4).sum();

    double ca, cr, c0;
    pwa.affine_coeffs(regions[static_cast<size_t>(l)], ca, cr, c0);
    const Eigen::VectorXd m = (ca * g_ta + cr * g_tr).transpose();
    const double b = ca * ta_free + cr * tr_free + c0;
    sp.pmv_rows[static_cast<size_t>(l)] = m;
    sp.pmv_offset(l) = b;

    const double w = 2.0 * cfg.alpha * occupancy[static_cast<size_t>(l)];
    if (w != 0) {
      sp.H += w * m * m.transpose();
      sp.g += w * b * m;
      sp.c0 += 0.5 * w * b * b;
    }
    sp.H(l, l) += 2.0 * tariff[static_cast<size_t>(l)];

    // Active-region split half-planes mapped into u-space. Row 2l bounds
    // t_a against the split, row 2l+1 bounds t_r.
    const int r = regions[static_cast<size_t>(l)];
    const double sa = (r == 0 || r == 2) ? 1.0 : -1.0;  // t_a side (<= split or >=)
    const double sr = (r == 0 || r == 1) ? 1.0 : -1.0;  // t_r side
    sp.omega.A.row(2 * l) = sa * g_ta;
    sp.omega.b(2 * l) = sa * (pwa.split_ta - ta_free);
    sp.omega.A.row(2 * l + 1) = sr * g_tr;
    sp.omega.b(2 * l + 1) = sr * (pwa.split_tr - tr_free);
  }
  return sp;
}

ZoneSubproblem build_subproblem(const ZoneHorizon& hz, const comfort::PwaComfortModel& pwa,
                                const Eigen::VectorXd& u_ref_kw, const MpcConfig& cfg,
                                const std::vector<double>& tariff,
                                const std::vector<double>& occupancy) {
  ZoneSubproblem sp = build_subproblem_for_regions(hz, pwa, detect_regions(hz, pwa, u_ref_kw),
                                                   cfg, tariff, occupancy);
  for (int l = 0; l < hz.N; ++l) {
    double ta, tr;
    hz.operating_point(u_ref_kw, l, ta, tr);
    if (!pwa.in_domain(ta, tr)) sp.extrapolated = true;
  }
  return sp;
}

namespace {

double max_region_diameter(const comfort::PwaComfortModel& pwa) {
  double d = 0;
  for (const auto& r : pwa.regions) {
    d = std::max(d, std::hypot(r.bounds.width(), r.bounds.height()));
  }
  return d;
}

admm::LocalQuadratic to_local(const ZoneSubproblem& sp) {
  return {sp.H, sp.g, sp.lo, sp.hi, sp.c0};
}

std::vector<Eigen::VectorXd> clamp_warm(const std::vector<ZoneHorizon>& zones,
                                        const MpcConfig& cfg,
                                        const std::vector<Eigen::VectorXd>& warm) {
  std::vector<Eigen::VectorXd> out(zones.size());
  for (size_t i = 0; i < zones.size(); ++i) {
    Eigen::VectorXd u = (static_cast<int>(i) < static_cast<int>(warm.size()) &&
                         warm[i].size() == zones[i].N)
                            ? warm[i]
                            : Eigen::VectorXd::Constant(zones[i].N, cfg.u_min_w / kWPerKw);
    out[i] = u.cwiseMax(cfg.u_min_w / kWPerKw).cwiseMin(cfg.u_max_w / kWPerKw);
  }
  return out;
}

// Damped least-squares nudge of u so that the operating points of the
// violated steps move to the centroids of the regions across the violated
// boundaries (restart rule of the convex-ADMM strategy).
Eigen::VectorXd restart_point(const ZoneHorizon& hz, const comfort::PwaComfortModel& pwa,
                              const ZoneSubproblem& sp, const Eigen::VectorXd& u_star,
                              double eps) {
  const Eigen::VectorXd slack = sp.omega.b - sp.omega.A * u_star;
  std::vector<int> steps;
  std::vector<bool> flip_ta, flip_tr;
  for (int l = 0; l < hz.N; ++l) {
    const bool va = slack(2 * l) <= eps;
    const bool vr = slack(2 * l + 1) <= eps;
    if (va || vr) {
      steps.push_back(l);
      flip_ta.push_back(va);
      flip_tr.push_back(vr);
    }
  }
  if (steps.empty()) return u_star;

  const int m = static_cast<int>(steps.size());
  Eigen::MatrixXd J(2 * m, hz.N);
  Eigen::VectorXd dy(2 * m);
  for (int k = 0; k < m; ++k) {
    const int l = steps[static_cast<size_t>(k)];
    double ta, tr;
    hz.operating_point(u_star, l, ta, tr);
    int r = sp.active_regions[static_cast<size_t>(l)];
    if (flip_ta[static_cast<size_t>(k)]) r ^= 1;  // cross the t_a split
    if (flip_tr[static_cast<size_t>(k)]) r ^= 2;  // cross the t_r split
    const comfort::Rect& rc = pwa.regions[static_cast<size_t>(r)].bounds;
    const int s = thermal::kStateDim * l;
    J.row(2 * k) = hz.Gamma_kw.row(s);
    J.row(2 * k + 1) = 0.25 * (hz.Gamma_kw.row(s + 1) + hz.Gamma_kw.row(s + 2) +
                               hz.Gamma_kw.row(s + 3) + hz.Gamma_kw.row(s + 4));
    dy(2 * k) = 0.5 * (rc.ta_lo + rc.ta_hi) - ta;
    dy(2 * k + 1) = 0.5 * (rc.tr_lo + rc.tr_hi) - tr;
  }
  const Eigen::MatrixXd JJt = J * J.transpose();
  const double damp = 1e-8 * std::max(1.0, JJt.trace());
  const Eigen::VectorXd w =
      (JJt + damp * Eigen::MatrixXd::Identity(2 * m, 2 * m)).ldlt().solve(dy);
  return u_star + J.transpose() * w;
}

SolveReport finalize_report(const std::vector<ZoneSubproblem>& sps,
                            const std::vector<Eigen::VectorXd>& u) {
  SolveReport rep;
  rep.u_star = u;
  rep.interior_margins.resize(sps.size());
  for (size_t i = 0; i < sps.size(); ++i) {
    rep.objective += sps[i].objective(u[i]);
    rep.interior_margins[i] = qp::membership_margin(sps[i].omega, u[i]);
    rep.active_regions.push_back(sps[i].active_regions);
  }
  return rep;
}

}  // namespace

SolveReport solve_convex_admm(const std::vector<ZoneHorizon>& zones,
                              const comfort::PwaComfortModel& pwa, const MpcConfig& cfg,
                              const admm::AdmmConfig& admm_cfg_in,
                              const std::vector<double>& tariff,
                              const std::vector<double>& occupancy,
                              const std::vector<Eigen::VectorXd>& warm_kw, int jobs,
                              const admm::IterationLog& log) {
  cfg.validate();
  const int M = static_cast<int>(zones.size());
  if (M == 0) throw ParameterError("solve_convex_admm: no zones");
  const int N = zones[0].N;
  const auto t0 = clock_t_::now();

  admm::AdmmConfig acfg = admm_cfg_in;
  if (acfg.c_max.size() != N) {
    acfg.c_max = Eigen::VectorXd::Constant(N, cfg.budget_w(M) / kWPerKw);
  }
  const double eps = 1e-6 * max_region_diameter(pwa);

  std::vector<Eigen::VectorXd> warm = clamp_warm(zones, cfg, warm_kw);
  SolveReport rep;
  double build_max_seq = 0;

  for (int attempt = 0;; ++attempt) {
    std::vector<std::vector<int>> regions(static_cast<size_t>(M));
    std::vector<admm::LocalQuadratic> problems(static_cast<size_t>(M));
    {
      double mx = 0;
      for (int i = 0; i < M; ++i) {
        const auto tb = clock_t_::now();
        regions[static_cast<size_t>(i)] =
            detect_regions(zones[static_cast<size_t>(i)], pwa, warm[static_cast<size_t>(i)]);
        problems[static_cast<size_t>(i)] = to_local(build_subproblem_for_regions(
            zones[static_cast<size_t>(i)], pwa, regions[static_cast<size_t>(i)], cfg, tariff,
            occupancy));
        mx = std::max(mx, seconds_since(tb));
      }
      build_max_seq += mx;
    }

    int switches = 0;
    const auto rebuild = [&](int /*tau*/, const std::vector<Eigen::VectorXd>& u,
                             std::vector<admm::LocalQuadratic>& probs) {
      double mx = 0;
      for (int i = 0; i < M; ++i) {
        const auto tb = clock_t_::now();
        std::vector<int> nr =
            detect_regions(zones[static_cast<size_t>(i)], pwa, u[static_cast<size_t>(i)]);
        if (nr != regions[static_cast<size_t>(i)]) {
          for (int l = 0; l < N; ++l) {
            if (nr[static_cast<size_t>(l)] != regions[static_cast<size_t>(i)][static_cast<size_t>(l)]) {
              ++switches;
            }
          }
          regions[static_cast<size_t>(i)] = std::move(nr);
          probs[static_cast<size_t>(i)] = to_local(build_subproblem_for_regions(
              zones[static_cast<size_t>(i)], pwa, regions[static_cast<size_t>(i)], cfg, tariff,
              occupancy));
        }
        mx = std::max(mx, seconds_since(tb));
      }
      build_max_seq += mx;
    };

    admm::AdmmRunResult run = admm::run(problems, acfg, warm, jobs, log, rebuild);
    rep.admm_iterations += run.state.tau;
    rep.region_switch_count += switches;
    rep.r_history = run.state.r_history;
    build_max_seq += run.max_sequential_seconds;

    std::vector<ZoneSubproblem> final_sps(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) {
      final_sps[static_cast<size_t>(i)] = build_subproblem_for_regions(
          zones[static_cast<size_t>(i)], pwa, regions[static_cast<size_t>(i)], cfg, tariff,
          occupancy);
    }
    SolveReport attempt_rep = finalize_report(final_sps, run.state.u);

    bool interior = true;
    for (double m : attempt_rep.interior_margins) interior = interior && m > eps;

    if (interior || attempt >= kRestartCap) {
      attempt_rep.admm_iterations = rep.admm_iterations;
      attempt_rep.restarts = rep.restarts;
      attempt_rep.region_switch_count = rep.region_switch_count;
      attempt_rep.r_history = std::move(rep.r_history);
      attempt_rep.degraded = !interior;
      attempt_rep.max_sequential_seconds = build_max_seq;
      attempt_rep.wall_seconds = seconds_since(t0);
      return attempt_rep;
    }

    ++rep.restarts;
    for (int i = 0; i < M; ++i) {
      if (attempt_rep.interior_margins[static_cast<size_t>(i)] <= eps) {
        warm[static_cast<size_t>(i)] =
            restart_point(zones[static_cast<size_t>(i)], pwa, final_sps[static_cast<size_t>(i)],
                          run.state.u[static_cast<size_t>(i)], eps)
                .cwiseMax(cfg.u_min_w / kWPerKw)
                .cwiseMin(cfg.u_max_w / kWPerKw);
      } else {
        warm[static_cast<size_t>(i)] = run.state.u[static_cast<size_t>(i)];
      }
    }
  }
}

namespace {

SolveReport solve_centralized(const std::vector<ZoneHorizon>& zones,
                              const comfort::PwaComfortModel& pwa, const MpcConfig& cfg,
                              const std::vector<double>& tariff,
                              const std::vector<double>& occupancy,
                              const std::vector<Eigen::VectorXd>& warm_kw,
                              bool redetect_regions) {
  cfg.validate();
  const int M = static_cast<int>(zones.size());
  if (M == 0) throw ParameterError("solve_centralized: no zones");
  const int N = zones[0].N;
  const auto t0 = clock_t_::now();

  const double c_max_kw = cfg.budget_w(M) / kWPerKw;
  std::vector<Eigen::VectorXd> cand = clamp_warm(zones, cfg, warm_kw);

  // Fixed global affine model: the region containing the domain center.
  const int center_region = pwa.region_of(0.5 * (pwa.domain.ta_lo + pwa.domain.ta_hi),
                                          0.5 * (pwa.domain.tr_lo + pwa.domain.tr_hi));

  auto regions_of = [&](const std::vector<Eigen::VectorXd>& u) {
    std::vector<std::vector<int>> rs(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) {
      rs[static_cast<size_t>(i)] =
          redetect_regions
              ? detect_regions(zones[static_cast<size_t>(i)], pwa, u[static_cast<size_t>(i)])
              : std::vector<int>(static_cast<size_t>(N), center_region);
    }
    return rs;
  };

  std::set<std::vector<int>> seen;
  SolveReport best;
  best.objective = std::numeric_limits<double>::infinity();
  int passes = 0;
  bool cycled = false;

  std::vector<std::vector<int>> regions = regions_of(cand);
  for (passes = 1; passes <= 20; ++passes) {
    std::vector<int> key;
    for (const auto& r : regions) key.insert(key.end(), r.begin(), r.end());
    if (!seen.insert(key).second) {
      cycled = true;
      break;
    }

    std::vector<ZoneSubproblem> sps(static_cast<size_t>(M));
    qp::StackedQp sqp;
    sqp.g.resize(M * N);
    sqp.lo.resize(M * N);
    sqp.hi.resize(M * N);
    sqp.A = Eigen::MatrixXd::Zero(N, M * N);
    sqp.r_lo = Eigen::VectorXd::Zero(N);
    sqp.r_hi = Eigen::VectorXd::Constant(N, c_max_kw);
    Eigen::VectorXd warm_stack(M * N);
    for (int i = 0; i < M; ++i) {
      sps[static_cast<size_t>(i)] = build_subproblem_for_regions(
          zones[static_cast<size_t>(i)], pwa, regions[static_cast<size_t>(i)], cfg, tariff,
          occupancy);
      const auto& sp = sps[static_cast<size_t>(i)];
      sqp.H_blocks.push_back(sp.H);
      sqp.g.segment(i * N, N) = sp.g;
      sqp.lo.segment(i * N, N) = sp.lo;
      sqp.hi.segment(i * N, N) = sp.hi;
      warm_stack.segment(i * N, N) = cand[static_cast<size_t>(i)];
      for (int l = 0; l < N; ++l) sqp.A(l, i * N + l) = 1.0;
    }

    const qp::StackedQpResult sol = qp::solve_stacked_qp(sqp, warm_stack);
    std::vector<Eigen::VectorXd> u(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) u[static_cast<size_t>(i)] = sol.u.segment(i * N, N);

    SolveReport rep = finalize_report(sps, u);
    if (rep.objective < best.objective) {
      best = rep;
    }
    cand = u;

    const std::vector<std::vector<int>> nr = regions_of(u);
    if (nr == regions) break;  // assignment stationary
    regions = nr;
  }

  best.degraded = cycled;
  best.wall_seconds = seconds_since(t0);
  best.max_sequential_seconds = best.wall_seconds;  // no parallel decomposition
  return best;
}

}  // namespace

SolveReport solve_centralized_pwa(const std::vector<ZoneHorizon>& zones,
                                  const comfort::PwaComfortModel& pwa, const MpcConfig& cfg,
                                  const std::vector<double>& tariff,
                                  const std::vector<double>& occupancy,
                                  const std::vector<Eigen::VectorXd>& warm_kw) {
  return solve_centralized(zones, pwa, cfg, tariff, occupancy, warm_kw, true);
}

SolveReport solve_centralized_linear(const std::vector<ZoneHorizon>& zones,
                                     const comfort::PwaComfortModel& pwa, const MpcConfig& cfg,
                                     const std::vector<double>& tariff,
                                     const std::vector<double>& occupancy,
                                     const std::vector<Eigen::VectorXd>& warm_kw) {
  return solve_centralized(zones, pwa, cfg, tariff, occupancy, warm_kw, false);
}

}  // namespace dmpc::mpc
