#include <doctest.h>

#include <limits>
#include <random>

#include "dmpc/qp.hpp"

using namespace dmpc;
using namespace dmpc::qp;

namespace {

Eigen::MatrixXd random_spd(int n, std::mt19937& rng, double reg = 0.5) {
  std::normal_distribution<double> nd(0, 1);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = nd(rng);
  return M * M.transpose() + reg * Eigen::MatrixXd::Identity(n, n);
}

Eigen::VectorXd random_vec(int n, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

// Brute-force oracle: enumerate all 3^n active-set sign patterns
// (-1 at lower bound, 0 free, +1 at upper bound), solve the equality-
// constrained problem for each, keep box-feasible candidates, return the
// best objective value's minimizer.
Eigen::VectorXd enumerate_box_qp(const BoxQp& qp) {
  const int n = static_cast<int>(qp.g.size());
  int patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_u;
  for (int code = 0; code < patterns; ++code) {
    int c = code;
    std::vector<int> state(n);
    std::vector<int> free_idx;
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i, c /= 3) {
      state[i] = c % 3;
      if (state[i] == 0) free_idx.push_back(i);
      u(i) = state[i] == 1 ? qp.lo(i) : state[i] == 2 ? qp.hi(i) : 0.0;
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Eigen::MatrixXd Hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = -qp.g(free_idx[a]);
        for (int b = 0; b < nf; ++b) Hff(a, b) = qp.H(free_idx[a], free_idx[b]);
        for (int i = 0; i < n; ++i) {
          if (state[i] != 0) rhs(a) -= qp.H(free_idx[a], i) * u(i);
        }
      }
      const Eigen::VectorXd uf = Hff.ldlt().solve(rhs);
      for (int a = 0; a < nf; ++a) u(free_idx[a]) = uf(a);
    }
    bool feasible = true;
    for (int i = 0; i < n; ++i) {
      if (u(i) < qp.lo(i) - 1e-10 || u(i) > qp.hi(i) + 1e-10) feasible = false;
    }
    if (!feasible) continue;
    const double obj = qp.objective(u);
    if (obj < best) {
      best = obj;
      best_u = u;
    }
  }
  return best_u;
}

// Second independent oracle: long projected-gradient run.
Eigen::VectorXd projected_gradient(const BoxQp& qp, int iters) {
  const double step = 1.0 / (qp.H.operatorNorm() + 1.0);
  Eigen::VectorXd u = 0.5 * (qp.lo + qp.hi);
  for (int k = 0; k < iters; ++k) {
    u -= step * (qp.H * u + qp.g);
    u = u.cwiseMax(qp.lo).cwiseMin(qp.hi);
  }
  return u;
}

}  // namespace

TEST_CASE("box QP: unconstrained minimizer inside the box is returned exactly") {
  BoxQp qp;
  qp.H = 2.0 * Eigen::MatrixXd::Identity(3, 3);
  qp.g = Eigen::VectorXd::Constant(3, -2.0);  // minimizer at 1
  qp.lo = Eigen::VectorXd::Zero(3);
  qp.hi = Eigen::VectorXd::Constant(3, 5.0);
  const auto r = solve_box_qp(qp, Eigen::VectorXd::Zero(3));
  CHECK((r.u - Eigen::VectorXd::Ones(3)).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("box QP: clamps to the active bound when the minimizer is outside") {
  BoxQp qp;
  qp.H = Eigen::MatrixXd::Identity(2, 2);
  qp.g = (Eigen::VectorXd(2) << -10.0, 10.0).finished();
  qp.lo = Eigen::VectorXd::Zero(2);
  qp.hi = Eigen::VectorXd::Constant(2, 3.0);
  const auto r = solve_box_qp(qp, Eigen::VectorXd::Ones(2));
  CHECK(r.u(0) == doctest::Approx(3.0));
  CHECK(r.u(1) == doctest::Approx(0.0));
}

TEST_CASE("box QP matches enumeration and projected-gradient oracles on random problems") {
  std::mt19937 rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    BoxQp qp;
    const int n = 6;
    qp.H = random_spd(n, rng);
    qp.g = random_vec(n, rng, 2.0);
    qp.lo = random_vec(n, rng).cwiseMin(Eigen::VectorXd::Zero(n));
    qp.hi = qp.lo + random_vec(n, rng).cwiseAbs() + Eigen::VectorXd::Constant(n, 0.1);
    const auto r = solve_box_qp(qp, 0.5 * (qp.lo + qp.hi));
    const Eigen::VectorXd ue = enumerate_box_qp(qp);
    CHECK((r.u - ue).lpNorm<Eigen::Infinity>() < 1e-7);
    if (trial < 5) {
      const Eigen::VectorXd up = projected_gradient(qp, 1000000);
      CHECK((r.u - up).lpNorm<Eigen::Infinity>() < 1e-6);
    }
    // KKT stationarity on the free set
    const Eigen::VectorXd grad = qp.H * r.u + qp.g;
    for (int i = 0; i < n; ++i) {
      if (r.u(i) > qp.lo(i) + 1e-9 && r.u(i) < qp.hi(i) - 1e-9) {
        CHECK(std::abs(grad(i)) < 1e-7);
      }
    }
  }
}

TEST_CASE("box QP with H = cI is the box projection of -g/c") {
  std::mt19937 rng(7);
  BoxQp qp;
  const int n = 8;
  const double c = 3.0;
  qp.H = c * Eigen::MatrixXd::Identity(n, n);
  qp.g = random_vec(n, rng, 5.0);
  qp.lo = Eigen::VectorXd::Constant(n, -1.0);
  qp.hi = Eigen::VectorXd::Constant(n, 1.0);
  const auto r = solve_box_qp(qp, Eigen::VectorXd::Zero(n));
  const Eigen::VectorXd proj = (-qp.g / c).cwiseMax(qp.lo).cwiseMin(qp.hi);
  CHECK((r.u - proj).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("box QP: warm starting at the solution finishes immediately") {
  std::mt19937 rng(17);
  BoxQp qp;
  qp.H = random_spd(5, rng);
  qp.g = random_vec(5, rng, 2.0);
  qp.lo = Eigen::VectorXd::Constant(5, -1.0);
  qp.hi = Eigen::VectorXd::Constant(5, 1.0);
  const auto cold = solve_box_qp(qp, Eigen::VectorXd::Zero(5));
  const auto warm = solve_box_qp(qp, cold.u);
  CHECK((warm.u - cold.u).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(warm.iterations <= cold.iterations);
}

TEST_CASE("box QP rejects malformed problems") {
  BoxQp qp;
  qp.H = Eigen::MatrixXd::Identity(2, 2);
  qp.g = Eigen::VectorXd::Zero(2);
  qp.lo = Eigen::VectorXd::Ones(2);
  qp.hi = Eigen::VectorXd::Zero(2);  // lo > hi
  CHECK_THROWS_AS(solve_box_qp(qp, Eigen::VectorXd::Zero(2)), ParameterError);
}

TEST_CASE("membership margin") {
  Polyhedron empty;
  empty.A = Eigen::MatrixXd(0, 2);
  empty.b = Eigen::VectorXd(0);
  CHECK(membership_margin(empty, Eigen::VectorXd::Zero(2)) ==
        std::numeric_limits<double>::infinity());

  Polyhedron box;  // x <= 1, -x <= 1 (i.e. |x| <= 1), 1-D
  box.A = (Eigen::MatrixXd(2, 1) << 1.0, -1.0).finished();
  box.b = Eigen::VectorXd::Ones(2);
  CHECK(membership_margin(box, Eigen::VectorXd::Constant(1, 0.25)) == doctest::Approx(0.75));
  CHECK(membership_margin(box, Eigen::VectorXd::Constant(1, 1.5)) == doctest::Approx(-0.5));
  CHECK(membership_margin(box, Eigen::VectorXd::Constant(1, 1.0)) == doctest::Approx(0.0));
}

TEST_CASE("stacked QP without general rows equals the box solver per block") {
  std::mt19937 rng(23);
  StackedQp sq;
  const int blocks = 3, nb = 4;
  BoxQp whole;
  whole.H = Eigen::MatrixXd::Zero(blocks * nb, blocks * nb);
  for (int b = 0; b < blocks; ++b) {
    sq.H_blocks.push_back(random_spd(nb, rng));
    whole.H.block(b * nb, b * nb, nb, nb) = sq.H_blocks.back();
  }
  sq.g = random_vec(blocks * nb, rng, 2.0);
  sq.lo = Eigen::VectorXd::Constant(blocks * nb, -1.0);
  sq.hi = Eigen::VectorXd::Constant(blocks * nb, 1.0);
  sq.A = Eigen::MatrixXd(0, blocks * nb);
  sq.r_lo = Eigen::VectorXd(0);
  sq.r_hi = Eigen::VectorXd(0);
  whole.g = sq.g;
  whole.lo = sq.lo;
  whole.hi = sq.hi;
  const auto rs = solve_stacked_qp(sq, Eigen::VectorXd::Zero(blocks * nb));
  const auto rb = solve_box_qp(whole, Eigen::VectorXd::Zero(blocks * nb));
  CHECK((rs.u - rb.u).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(rs.active_rows.empty());
}

TEST_CASE("stacked QP: binding budget row holds with equality") {
  // Two 1-D blocks that both want their maximum; budget forces the split.
  StackedQp sq;
  sq.H_blocks = {Eigen::MatrixXd::Identity(1, 1), 2.0 * Eigen::MatrixXd::Identity(1, 1)};
  sq.g = (Eigen::VectorXd(2) << -10.0, -10.0).finished();
  sq.lo = Eigen::VectorXd::Zero(2);
  sq.hi = Eigen::VectorXd::Constant(2, 8.0);
  sq.A = Eigen::MatrixXd::Ones(1, 2);
  sq.r_lo = Eigen::VectorXd::Zero(1);
  sq.r_hi = Eigen::VectorXd::Constant(1, 6.0);
  const auto r = solve_stacked_qp(sq, Eigen::VectorXd::Zero(2));
  CHECK(r.u.sum() == doctest::Approx(6.0).epsilon(1e-8));
  REQUIRE(r.active_rows.size() == 1);
  CHECK(r.active_rows[0] == 0);
  // KKT: equal marginal costs on the budget (u0 - 10 = 2 u1 - 10)
  CHECK(r.u(0) == doctest::Approx(2.0 * r.u(1)).epsilon(1e-6));
}

TEST_CASE("stacked QP is feasible and locally optimal on random budgeted problems") {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 25; ++trial) {
    StackedQp sq;
    sq.H_blocks = {random_spd(2, rng), random_spd(2, rng)};
    sq.g = random_vec(4, rng, 2.0);
    sq.lo = Eigen::VectorXd::Constant(4, -1.0);
    sq.hi = Eigen::VectorXd::Constant(4, 1.0);
    // one budget row over the first coordinate of each block
    sq.A = Eigen::MatrixXd::Zero(1, 4);
    sq.A(0, 0) = 1.0;
    sq.A(0, 2) = 1.0;
    sq.r_lo = Eigen::VectorXd::Constant(1, -0.5);
    sq.r_hi = Eigen::VectorXd::Constant(1, 0.5);
    const auto r = solve_stacked_qp(sq, Eigen::VectorXd::Zero(4));

    // feasibility plus local optimality against random feasible perturbations
    CHECK(sq.A.row(0).dot(r.u) <= 0.5 + 1e-8);
    CHECK(sq.A.row(0).dot(r.u) >= -0.5 - 1e-8);
    const double fstar = sq.objective(r.u);
    for (int k = 0; k < 200; ++k) {
      Eigen::VectorXd v = r.u + 1e-3 * random_vec(4, rng);
      v = v.cwiseMax(sq.lo).cwiseMin(sq.hi);
      const double a = sq.A.row(0).dot(v);
      if (a > 0.5 || a < -0.5) continue;
      CHECK(sq.objective(v) >= fstar - 1e-9);
    }
  }
}
