#include <random>

#include <benchmark/benchmark.h>

#include "dmpc/admm.hpp"
#include "dmpc/comfort.hpp"
#include "dmpc/matexp.hpp"
#include "dmpc/mpc.hpp"
#include "dmpc/qp.hpp"
#include "dmpc/thermal.hpp"

using namespace dmpc;

namespace {

const comfort::PwaComfortModel& summer_model() {
  static const comfort::PwaComfortModel m = comfort::fit_pwa(comfort::ComfortParams::summer());
  return m;
}

mpc::ZoneHorizon make_hot_zone(int N) {
  std::vector<thermal::DisturbanceSample> d(static_cast<size_t>(N));
  for (auto& s : d) {
    s.T_out_env = 30.0;
    s.Q_rad_wall = {20.0, 30.0, 30.0, 40.0};
    s.Q_internal = 150.0;
    s.Q_rad_zone = 80.0;
  }
  const auto model = thermal::discretize(
      thermal::build_continuous(thermal::ZoneThermalParams::reference()), 900.0, -1.0);
  return mpc::make_horizon(model, thermal::StateVec::Constant(28.5), d);
}

void BM_SolveTcl(benchmark::State& state) {
  const auto p = comfort::ComfortParams::summer();
  double ta = 22.0;
  for (auto _ : state) {
    ta = 22.0 + std::fmod(ta * 1.61803, 8.0);
    benchmark::DoNotOptimize(comfort::solve_tcl({ta, 26.0}, p).t_cl);
  }
}
BENCHMARK(BM_SolveTcl);

void BM_PmvExact(benchmark::State& state) {
  const auto p = comfort::ComfortParams::summer();
  double ta = 22.0;
  for (auto _ : state) {
    ta = 22.0 + std::fmod(ta * 1.61803, 8.0);
    benchmark::DoNotOptimize(comfort::pmv_exact({ta, 25.5}, p));
  }
}
BENCHMARK(BM_PmvExact);

void BM_Zoh9x9(benchmark::State& state) {
  const auto cont = thermal::build_continuous(thermal::ZoneThermalParams::reference());
  const Eigen::MatrixXd A = cont.Abar;
  for (auto _ : state) {
    benchmark::DoNotOptimize(zoh(A, 900.0).Ad);
  }
}
BENCHMARK(BM_Zoh9x9);

void BM_BoxQp12(benchmark::State& state) {
  std::mt19937 rng(5);
  std::normal_distribution<double> nd(0, 1);
  const int n = 12;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = nd(rng);
  qp::BoxQp q;
  q.H = M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  q.g = Eigen::VectorXd::NullaryExpr(n, [&] { return 2.0 * nd(rng); });
  q.lo = Eigen::VectorXd::Zero(n);
  q.hi = Eigen::VectorXd::Constant(n, 2.0);
  const Eigen::VectorXd warm = Eigen::VectorXd::Zero(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qp::solve_box_qp(q, warm).u);
  }
}
BENCHMARK(BM_BoxQp12);

void BM_AdmmLocalUpdate(benchmark::State& state) {
  const int N = 12;
  const auto hz = make_hot_zone(N);
  mpc::MpcConfig cfg;
  const auto sched = mpc::Schedules::standard();
  const auto sp = mpc::build_subproblem(hz, summer_model(), Eigen::VectorXd::Zero(N), cfg,
                                        sched.tariff_horizon(48, N, 900.0),
                                        sched.occupancy_horizon(48, N, 900.0));
  const admm::LocalQuadratic q{sp.H, sp.g, sp.lo, sp.hi, sp.c0};
  const Eigen::VectorXd others = Eigen::VectorXd::Constant(N, 10.0);
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(N, 12.0);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(N);
  const Eigen::VectorXd warm = Eigen::VectorXd::Ones(N);
  for (auto _ : state) {
    benchmark::DoNotOptimize(admm::local_update(q, others, z, theta, 0.1, warm));
  }
}
BENCHMARK(BM_AdmmLocalUpdate);

void BM_BuildSubproblem(benchmark::State& state) {
  const int N = 12;
  const auto hz = make_hot_zone(N);
  mpc::MpcConfig cfg;
  const auto sched = mpc::Schedules::standard();
  const auto tariff = sched.tariff_horizon(48, N, 900.0);
  const auto occ = sched.occupancy_horizon(48, N, 900.0);
  const Eigen::VectorXd u = Eigen::VectorXd::Ones(N);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mpc::build_subproblem(hz, summer_model(), u, cfg, tariff, occ).H);
  }
}
BENCHMARK(BM_BuildSubproblem);

}  // namespace

BENCHMARK_MAIN();
