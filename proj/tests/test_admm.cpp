#include <doctest.h>

#include <random>

#include "dmpc/admm.hpp"

using namespace dmpc;
using namespace dmpc::admm;

namespace {

LocalQuadratic random_local(int n, std::mt19937& rng) {
  std::normal_distribution<double> nd(0, 1);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = nd(rng);
  LocalQuadratic q;
  q.H = M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  q.g = Eigen::VectorXd::NullaryExpr(n, [&] { return nd(rng); });
  q.lo = Eigen::VectorXd::Zero(n);
  q.hi = Eigen::VectorXd::Constant(n, 2.0);
  return q;
}

std::vector<Eigen::VectorXd> zeros(int m, int n) {
  return std::vector<Eigen::VectorXd>(m, Eigen::VectorXd::Zero(n));
}

}  // namespace

TEST_CASE("z_update, dual_update and residual arithmetic") {
  const Eigen::VectorXd sum = (Eigen::VectorXd(3) << -1.0, 0.5, 4.0).finished();
  const Eigen::VectorXd theta = (Eigen::VectorXd(3) << 0.2, 0.0, 1.0).finished();
  const Eigen::VectorXd cmax = Eigen::VectorXd::Constant(3, 3.0);
  const Eigen::VectorXd z = z_update(sum, theta, cmax);
  CHECK(z(0) == doctest::Approx(0.0));   // clipped below
  CHECK(z(1) == doctest::Approx(0.5));   // interior
  CHECK(z(2) == doctest::Approx(3.0));   // clipped at budget

  const Eigen::VectorXd th = dual_update(theta, sum, z);
  CHECK(th(0) == doctest::Approx(0.2 - 1.0));
  CHECK(th(1) == doctest::Approx(0.0));
  CHECK(th(2) == doctest::Approx(1.0 + 1.0));

  std::vector<Eigen::VectorXd> a = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)};
  std::vector<Eigen::VectorXd> b = {Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)};
  CHECK(residual(a, b) == doctest::Approx(1.0));  // (|1|+|1| + 0) / 2
}

TEST_CASE("local_update solves the augmented box QP") {
  std::mt19937 rng(5);
  const int n = 4;
  const LocalQuadratic q = random_local(n, rng);
  const Eigen::VectorXd others = Eigen::VectorXd::Constant(n, 0.3);
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(n, 1.0);
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(n, -0.1);
  const double rho = 0.7;
  const Eigen::VectorXd u = local_update(q, others, z, theta, rho, Eigen::VectorXd::Zero(n));

  // optimality of the augmented objective against feasible perturbations
  auto aug = [&](const Eigen::VectorXd& v) {
    return q.objective(v) + 0.5 * rho * (v + others - z + theta).squaredNorm();
  };
  std::normal_distribution<double> nd(0, 1);
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd v = u + 1e-4 * Eigen::VectorXd::NullaryExpr(n, [&] { return nd(rng); });
    v = v.cwiseMax(q.lo).cwiseMin(q.hi);
    CHECK(aug(v) >= aug(u) - 1e-10);
  }
}

TEST_CASE("single zone with slack budget reduces to the local box QP") {
  std::mt19937 rng(9);
  const int n = 5;
  const LocalQuadratic q = random_local(n, rng);
  AdmmConfig cfg;
  cfg.c_max = Eigen::VectorXd::Constant(n, 100.0);  // never binding
  cfg.tol = 1e-10;
  cfg.max_iter = 500;
  const auto res = run({q}, cfg, zeros(1, n));
  CHECK(res.converged);
  const Eigen::VectorXd direct =
      local_update({q.H, q.g, q.lo, q.hi, 0.0}, Eigen::VectorXd::Zero(n),
                   Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0.0,
                   Eigen::VectorXd::Zero(n));
  CHECK((res.state.u[0] - direct).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("identical zones stay identical at every iteration") {
  std::mt19937 rng(13);
  const int n = 4;
  const LocalQuadratic q = random_local(n, rng);
  AdmmConfig cfg;
  cfg.c_max = Eigen::VectorXd::Constant(n, 1.5);
  cfg.max_iter = 40;
  cfg.tol = 0.0;  // run all iterations
  const auto hook = [](int, const std::vector<Eigen::VectorXd>& u,
                       std::vector<LocalQuadratic>&) {
    REQUIRE(u.size() == 3);
    for (size_t i = 1; i < u.size(); ++i) {
      CHECK((u[i] - u[0]).lpNorm<Eigen::Infinity>() == 0.0);
    }
  };
  cfg.explore_iters = cfg.max_iter;  // hook fires every iteration
  run({q, q, q}, cfg, zeros(3, n), 1, {}, hook);
}

TEST_CASE("fixed point matches the coupled QP solved directly") {
  // Two zones, two steps, binding budget. Reference: minimize the summed
  // local objectives subject to boxes and 0 <= u1+u2 <= c via a fine grid
  // refinement around the KKT solution of the equality-coupled problem.
  std::mt19937 rng(21);
  const int n = 2;
  LocalQuadratic q1 = random_local(n, rng);
  LocalQuadratic q2 = random_local(n, rng);
  q1.g = Eigen::VectorXd::Constant(n, -6.0);  // push both against the budget
  q2.g = Eigen::VectorXd::Constant(n, -6.0);
  AdmmConfig cfg;
  cfg.c_max = Eigen::VectorXd::Constant(n, 2.5);
  cfg.max_iter = 4000;
  cfg.explore_iters = 0;
  cfg.tol = 1e-12;
  cfg.rho = 1.0;
  const auto res = run({q1, q2}, cfg, zeros(2, n));

  // brute-force reference on a shrinking grid
  auto total = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return q1.objective(a) + q2.objective(b);
  };
  Eigen::VectorXd best1 = res.state.u[0], best2 = res.state.u[1];
  double width = 2.0;
  for (int pass = 0; pass < 6; ++pass) {
    Eigen::VectorXd c1 = best1, c2 = best2;
    const int steps = 9;
    double f = total(best1, best2);
    for (int a0 = 0; a0 < steps; ++a0)
      for (int a1 = 0; a1 < steps; ++a1)
        for (int b0 = 0; b0 < steps; ++b0)
          for (int b1 = 0; b1 < steps; ++b1) {
            Eigen::VectorXd u1(2), u2(2);
            u1 << c1(0) + width * (a0 - 4) / 4.0, c1(1) + width * (a1 - 4) / 4.0;
            u2 << c2(0) + width * (b0 - 4) / 4.0, c2(1) + width * (b1 - 4) / 4.0;
            u1 = u1.cwiseMax(q1.lo).cwiseMin(q1.hi);
            u2 = u2.cwiseMax(q2.lo).cwiseMin(q2.hi);
            bool feas = true;
            for (int l = 0; l < n; ++l) {
              if (u1(l) + u2(l) > cfg.c_max(l) + 1e-12 || u1(l) + u2(l) < -1e-12) feas = false;
            }
            if (!feas) continue;
            const double v = total(u1, u2);
            if (v < f) {
              f = v;
              best1 = u1;
              best2 = u2;
            }
          }
    width /= 4.0;
  }
  CHECK((res.state.u[0] - best1).lpNorm<Eigen::Infinity>() < 1e-3);
  CHECK((res.state.u[1] - best2).lpNorm<Eigen::Infinity>() < 1e-3);
  CHECK(total(res.state.u[0], res.state.u[1]) <= total(best1, best2) + 1e-6);
  // budget feasibility at the fixed point
  Eigen::VectorXd sum = res.state.u[0] + res.state.u[1];
  CHECK((sum - cfg.c_max).maxCoeff() < 1e-6);
}

TEST_CASE("scaled iteration equals the unscaled-dual formulation with lambda = rho theta") {
  std::mt19937 rng(33);
  const int n = 3, m = 4;
  std::vector<LocalQuadratic> probs;
  for (int i = 0; i < m; ++i) probs.push_back(random_local(n, rng));
  AdmmConfig cfg;
  cfg.c_max = Eigen::VectorXd::Constant(n, 3.0);
  cfg.max_iter = 25;
  cfg.explore_iters = 0;
  cfg.tol = 0.0;
  const double rho = cfg.rho;
  const auto res = run(probs, cfg, zeros(m, n));

  // Independent replica of the iteration with an unscaled multiplier
  // lambda = rho * theta, using lambda/rho inside the local updates.
  std::vector<Eigen::VectorXd> u = zeros(m, n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);
  {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    for (const auto& ui : u) s += ui;
    z = s.cwiseMax(0.0).cwiseMin(cfg.c_max);
  }
  for (int tau = 0; tau < cfg.max_iter; ++tau) {
    Eigen::VectorXd sum_old = Eigen::VectorXd::Zero(n);
    for (const auto& ui : u) sum_old += ui;
    std::vector<Eigen::VectorXd> u_new(m);
    for (int i = 0; i < m; ++i) {
      u_new[i] = local_update(probs[i], sum_old - u[i], z, lambda / rho, rho, u[i]);
    }
    Eigen::VectorXd sum_new = Eigen::VectorXd::Zero(n);
    for (const auto& ui : u_new) sum_new += ui;
    z = (sum_new + lambda / rho).cwiseMax(0.0).cwiseMin(cfg.c_max);
    lambda += rho * (sum_new - z);
    u = u_new;
  }
  for (int i = 0; i < m; ++i) {
    CHECK((u[i] - res.state.u[i]).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  CHECK((z - res.state.z).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((lambda / rho - res.state.theta).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("iterates are independent of the thread count") {
  std::mt19937 rng(45);
  const int n = 6, m = 12;
  std::vector<LocalQuadratic> probs;
  for (int i = 0; i < m; ++i) probs.push_back(random_local(n, rng));
  AdmmConfig cfg;
  cfg.c_max = Eigen::VectorXd::Constant(n, 4.0);
  cfg.max_iter = 30;
  cfg.tol = 0.0;
  const auto r1 = run(probs, cfg, zeros(m, n), 1);
  const auto r8 = run(probs, cfg, zeros(m, n), 8);
  for (int i = 0; i < m; ++i) {
    CHECK((r1.state.u[i] - r8.state.u[i]).lpNorm<Eigen::Infinity>() == 0.0);
  }
  CHECK((r1.state.z - r8.state.z).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((r1.state.theta - r8.state.theta).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(r1.state.r_history == r8.state.r_history);
}

TEST_CASE("z stays inside [0, c_max] at every iteration") {
  std::mt19937 rng(51);
  const int n = 4, m = 5;
  std::vector<LocalQuadratic> probs;
  for (int i = 0; i < m; ++i) probs.push_back(random_local(n, rng));
  AdmmConfig cfg;
  cfg.c_max = Eigen::VectorXd::Constant(n, 1.0);
  cfg.max_iter = 30;
  cfg.tol = 0.0;
  const auto res = run(probs, cfg, zeros(m, n));
  CHECK(res.state.z.minCoeff() >= -1e-12);
  CHECK((res.state.z - cfg.c_max).maxCoeff() <= 1e-12);
}

TEST_CASE("36 zones, 12 steps: cold-start convergence within 50 iterations") {
  std::mt19937 rng(77);
  const int n = 12, m = 36;
  std::vector<LocalQuadratic> probs;
  for (int i = 0; i < m; ++i) {
    LocalQuadratic q = random_local(n, rng);
    // energy-dominated diagonal cost resembling the production subproblems
    const Eigen::MatrixXd Hd = q.H.diagonal().asDiagonal();
    q.H = Hd + 0.5 * Eigen::MatrixXd::Identity(n, n);
    probs.push_back(q);
  }
  AdmmConfig cfg;
  cfg.c_max = Eigen::VectorXd::Constant(n, 0.8 * m * 2.0);
  cfg.max_iter = 50;
  cfg.tol = 1e-3;
  const auto res = run(probs, cfg, zeros(m, n));
  CHECK(res.converged);
  CHECK(res.state.tau <= 50);
  CHECK(res.state.r_history.back() < 1e-3);
  CHECK(res.max_sequential_seconds <= res.wall_seconds + 1e-9);
}
