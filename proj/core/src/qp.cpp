#include "dmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmpc::qp {

namespace {

constexpr double kKktTol = 1e-8;
constexpr int kIterCap = 10000;

}  // namespace

void BoxQp::validate() const {
  const auto n = g.size();
  if (H.rows() != n || H.cols() != n || lo.size() != n || hi.size() != n) {
    throw ParameterError("BoxQp: dimension mismatch");
  }
  if (!H.isApprox(H.transpose(), 1e-10)) throw ParameterError("BoxQp: H not symmetric");
  if ((lo.array() > hi.array()).any()) throw ParameterError("BoxQp: lo > hi");
}

BoxQpResult solve_box_qp(const BoxQp& qp, const Eigen::VectorXd& warm) {
  qp.validate();
  const int n = static_cast<int>(qp.g.size());
  Eigen::VectorXd u = warm.size() == n ? warm.cwiseMax(qp.lo).cwiseMin(qp.hi)
                                       : Eigen::VectorXd(qp.lo);

  // -1 at lower bound, +1 at upper, 0 free. Ties break toward the lower bound.
  std::vector<int> status(static_cast<size_t>(n), 0);
  std::vector<bool> fixed(static_cast<size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    if (qp.hi(i) - qp.lo(i) < 1e-14) {
      status[static_cast<size_t>(i)] = -1;
      fixed[static_cast<size_t>(i)] = true;
      u(i) = qp.lo(i);
    } else if (u(i) <= qp.lo(i)) {
      status[static_cast<size_t>(i)] = -1;
    } else if (u(i) >= qp.hi(i)) {
      status[static_cast<size_t>(i)] = +1;
    }
  }

  Eigen::VectorXd r(n), p(n);
  for (int iter = 1; iter <= kIterCap; ++iter) {
    r = qp.H * u + qp.g;

    std::vector<int> free;
    free.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      if (status[static_cast<size_t>(i)] == 0) free.push_back(i);
    }

    p.setZero();
    if (!free.empty()) {
      const int nf = static_cast<int>(free.size());
      Eigen::MatrixXd Hff(nf, nf);
      Eigen::VectorXd rf(nf);
      for (int a = 0; a < nf; ++a) {
        rf(a) = r(free[static_cast<size_t>(a)]);
        for (int b = 0; b < nf; ++b) {
          Hff(a, b) = qp.H(free[static_cast<size_t>(a)], free[static_cast<size_t>(b)]);
        }
      }
      const Eigen::VectorXd pf = Hff.llt().solve(-rf);
      for (int a = 0; a < nf; ++a) p(free[static_cast<size_t>(a)]) = pf(a);
    }

    if (p.lpNorm<Eigen::Infinity>() < 1e-12 * std::max(1.0, u.lpNorm<Eigen::Infinity>())) {
      // Stationary on the working set: examine bound multipliers.
      int worst = -1;
      double worst_val = -kKktTol;
      for (int i = 0; i < n; ++i) {
        if (fixed[static_cast<size_t>(i)] || status[static_cast<size_t>(i)] == 0) continue;
        const double mult = status[static_cast<size_t>(i)] == -1 ? r(i) : -r(i);
        if (mult < worst_val) {
          worst_val = mult;
          worst = i;
        }
      }
      if (worst < 0) return {u, iter};
      status[static_cast<size_t>(worst)] = 0;
      continue;
    }

    double alpha = 1.0;
    int blocking = -1, block_side = 0;
    for (int i : free) {
      if (p(i) > 0) {
        const double a = (qp.hi(i) - u(i)) / p(i);
        if (a < alpha) { alpha = a; blocking = i; block_side = +1; }
      } else if (p(i) < 0) {
        const double a = (qp.lo(i) - u(i)) / p(i);
        // On ties prefer the lower bound.
        if (a < alpha || (a == alpha && block_side == +1)) {
          alpha = a; blocking = i; block_side = -1;
        }
      }
    }
    u += alpha * p;
    if (blocking >= 0) {
      u(blocking) = block_side == -1 ? qp.lo(blocking) : qp.hi(blocking);
      status[static_cast<size_t>(blocking)] = block_side;
    }
  }

  const double kkt = (qp.H * u + qp.g).lpNorm<Eigen::Infinity>();
  throw NumericalError("solve_box_qp: iteration cap exceeded", kkt);
}

double membership_margin(const Polyhedron& poly, const Eigen::VectorXd& u) {
  if (poly.rows() == 0) return std::numeric_limits<double>::infinity();
  if (poly.A.cols() != u.size()) throw ParameterError("membership_margin: dimension mismatch");
  return (poly.b - poly.A * u).minCoeff();
}

// ---------------------------------------------------------------------------
// Stacked QP

void StackedQp::validate() const {
  const int n = dim();
  int total = 0;
  for (const auto& Hb : H_blocks) {
    if (Hb.rows() != Hb.cols()) throw ParameterError("StackedQp: non-square block");
    total += static_cast<int>(Hb.rows());
  }
  if (total != n || lo.size() != n || hi.size() != n) {
    throw ParameterError("StackedQp: dimension mismatch");
  }
  if (A.rows() != r_lo.size() || A.rows() != r_hi.size() || (A.rows() > 0 && A.cols() != n)) {
    throw ParameterError("StackedQp: general-row dimension mismatch");
  }
  if ((lo.array() > hi.array()).any() || (r_lo.array() > r_hi.array()).any()) {
    throw ParameterError("StackedQp: empty bound interval");
  }
}

Eigen::VectorXd StackedQp::gradient(const Eigen::VectorXd& u) const {
  Eigen::VectorXd r = g;
  int off = 0;
  for (const auto& Hb : H_blocks) {
    const int nb = static_cast<int>(Hb.rows());
    r.segment(off, nb) += Hb * u.segment(off, nb);
    off += nb;
  }
  return r;
}

double StackedQp::objective(const Eigen::VectorXd& u) const {
  double v = g.dot(u);
  int off = 0;
  for (const auto& Hb : H_blocks) {
    const int nb = static_cast<int>(Hb.rows());
    v += 0.5 * u.segment(off, nb).dot(Hb * u.segment(off, nb));
    off += nb;
  }
  return v;
}

namespace {

// Solves H x = y blockwise from precomputed per-block Cholesky factors,
// restricted to the free coordinates (fixed coordinates of y are ignored).
struct BlockSolver {
  const std::vector<Eigen::LLT<Eigen::MatrixXd>>* full;  // factors of whole blocks
  std::vector<Eigen::LLT<Eigen::MatrixXd>> sub;          // factors of free sub-blocks
  std::vector<std::vector<int>> free_idx;                // free coords per block, global index

  Eigen::VectorXd solve_free(const Eigen::VectorXd& y) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(y.size());
    for (size_t b = 0; b < sub.size(); ++b) {
      const auto& idx = free_idx[b];
      if (idx.empty()) continue;
      Eigen::VectorXd yb(static_cast<Eigen::Index>(idx.size()));
      for (size_t a = 0; a < idx.size(); ++a) yb(static_cast<Eigen::Index>(a)) = y(idx[a]);
      const Eigen::VectorXd xb = sub[b].solve(yb);
      for (size_t a = 0; a < idx.size(); ++a) x(idx[a]) = xb(static_cast<Eigen::Index>(a));
    }
    return x;
  }
};

}  // namespace

StackedQpResult solve_stacked_qp(const StackedQp& qp, const Eigen::VectorXd& warm) {
  qp.validate();
  const int n = qp.dim();
  const int nr = static_cast<int>(qp.A.rows());
  Eigen::VectorXd u = warm.size() == n ? warm.cwiseMax(qp.lo).cwiseMin(qp.hi)
                                       : Eigen::VectorXd(qp.lo);

  // Repair general-row infeasibility of the start point by shrinking toward
  // the box corner that satisfies the violated side (rows here have
  // nonnegative coefficients and disjoint supports).
  for (int j = 0; j < nr; ++j) {
    const Eigen::VectorXd a = qp.A.row(j).transpose();
    double val = a.dot(u);
    if (val > qp.r_hi(j)) {
      const double base = a.dot(qp.lo);
      const double t = (qp.r_hi(j) - base) / std::max(val - base, 1e-300);
      for (int i = 0; i < n; ++i) {
        if (a(i) != 0) u(i) = qp.lo(i) + t * (u(i) - qp.lo(i));
      }
    } else if (val < qp.r_lo(j)) {
      const double base = a.dot(qp.hi);
      const double t = (qp.r_lo(j) - base) / std::min(val - base, -1e-300);
      for (int i = 0; i < n; ++i) {
        if (a(i) != 0) u(i) = qp.hi(i) + t * (u(i) - qp.hi(i));
      }
    }
    val = a.dot(u);
    if (val > qp.r_hi(j) + 1e-9 || val < qp.r_lo(j) - 1e-9) {
      throw NumericalError("solve_stacked_qp: cannot repair infeasible start",
                           std::max(val - qp.r_hi(j), qp.r_lo(j) - val));
    }
  }

  std::vector<int> bstat(static_cast<size_t>(n), 0);   // bound status, as in box solver
  std::vector<int> rstat(static_cast<size_t>(nr), 0);  // general-row status
  std::vector<bool> bfixed(static_cast<size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    if (qp.hi(i) - qp.lo(i) < 1e-14) {
      bstat[static_cast<size_t>(i)] = -1;
      bfixed[static_cast<size_t>(i)] = true;
      u(i) = qp.lo(i);
    } else if (u(i) <= qp.lo(i)) {
      bstat[static_cast<size_t>(i)] = -1;
    } else if (u(i) >= qp.hi(i)) {
      bstat[static_cast<size_t>(i)] = +1;
    }
  }

  const int nb = static_cast<int>(qp.H_blocks.size());
  std::vector<int> block_off(static_cast<size_t>(nb));
  {
    int off = 0;
    for (int b = 0; b < nb; ++b) {
      block_off[static_cast<size_t>(b)] = off;
      off += static_cast<int>(qp.H_blocks[static_cast<size_t>(b)].rows());
    }
  }

  for (int iter = 1; iter <= kIterCap; ++iter) {
    const Eigen::VectorXd r = qp.gradient(u);

    BlockSolver bs;
    bs.sub.resize(static_cast<size_t>(nb));
    bs.free_idx.resize(static_cast<size_t>(nb));
    for (int b = 0; b < nb; ++b) {
      const int off = block_off[static_cast<size_t>(b)];
      const int sz = static_cast<int>(qp.H_blocks[static_cast<size_t>(b)].rows());
      auto& idx = bs.free_idx[static_cast<size_t>(b)];
      idx.clear();
      for (int i = 0; i < sz; ++i) {
        if (bstat[static_cast<size_t>(off + i)] == 0) idx.push_back(off + i);
      }
      if (idx.empty()) continue;
      Eigen::MatrixXd Hs(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
      for (size_t a = 0; a < idx.size(); ++a) {
        for (size_t c = 0; c < idx.size(); ++c) {
          Hs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) =
              qp.H_blocks[static_cast<size_t>(b)](idx[a] - off, idx[c] - off);
        }
      }
      bs.sub[static_cast<size_t>(b)].compute(Hs);
    }

    // Active general rows with nonzero free support enter the Schur system.
    std::vector<int> act;
    for (int j = 0; j < nr; ++j) {
      if (rstat[static_cast<size_t>(j)] == 0) continue;
      bool has_free = false;
      for (int i = 0; i < n && !has_free; ++i) {
        has_free = qp.A(j, i) != 0 && bstat[static_cast<size_t>(i)] == 0;
      }
      if (has_free) act.push_back(j);
    }
    const int na = static_cast<int>(act.size());

    const Eigen::VectorXd q = bs.solve_free(r);  // H^-1 r on free coords
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(nr);
    Eigen::VectorXd p = -q;
    if (na > 0) {
      Eigen::MatrixXd Af(na, n);  // active rows masked to free coords
      for (int a = 0; a < na; ++a) {
        for (int i = 0; i < n; ++i) {
          Af(a, i) = bstat[static_cast<size_t>(i)] == 0 ? qp.A(act[static_cast<size_t>(a)], i) : 0.0;
        }
      }
      Eigen::MatrixXd Y(n, na);
      for (int a = 0; a < na; ++a) Y.col(a) = bs.solve_free(Af.row(a).transpose());
      const Eigen::MatrixXd S = Af * Y;
      const Eigen::VectorXd mua = S.ldlt().solve(-Af * q);
      for (int a = 0; a < na; ++a) mu(act[static_cast<size_t>(a)]) = mua(a);
      p = -q - Y * mua;
    }
    for (int i = 0; i < n; ++i) {
      if (bstat[static_cast<size_t>(i)] != 0) p(i) = 0;
    }

    const double scale = std::max(1.0, u.lpNorm<Eigen::Infinity>());
    if (p.lpNorm<Eigen::Infinity>() < 1e-12 * scale) {
      // Multiplier test. Stationarity: r + A' mu - lam_lo + lam_hi = 0.
      const Eigen::VectorXd red = r + qp.A.transpose() * mu;
      int worst_bound = -1, worst_row = -1;
      double worst = -kKktTol * scale;
      for (int i = 0; i < n; ++i) {
        if (bfixed[static_cast<size_t>(i)] || bstat[static_cast<size_t>(i)] == 0) continue;
        const double m = bstat[static_cast<size_t>(i)] == -1 ? red(i) : -red(i);
        if (m < worst) { worst = m; worst_bound = i; }
      }
      for (int j = 0; j < nr; ++j) {
        if (rstat[static_cast<size_t>(j)] == 0 || qp.r_hi(j) - qp.r_lo(j) < 1e-14) continue;
        const double m = rstat[static_cast<size_t>(j)] == +1 ? mu(j) : -mu(j);
        if (m < worst) { worst = m; worst_bound = -1; worst_row = j; }
      }
      if (worst_bound < 0 && worst_row < 0) {
        StackedQpResult res;
        res.u = u;
        res.iterations = iter;
        for (int j = 0; j < nr; ++j) {
          if (rstat[static_cast<size_t>(j)] != 0) res.active_rows.push_back(j);
        }
        return res;
      }
      if (worst_row >= 0) {
        rstat[static_cast<size_t>(worst_row)] = 0;
      } else {
        bstat[static_cast<size_t>(worst_bound)] = 0;
      }
      continue;
    }

    // Ratio test against inactive bounds and row sides.
    double alpha = 1.0;
    int blk_bound = -1, blk_row = -1, blk_side = 0;
    for (int i = 0; i < n; ++i) {
      if (bstat[static_cast<size_t>(i)] != 0 || p(i) == 0) continue;
      if (p(i) > 0) {
        const double a = (qp.hi(i) - u(i)) / p(i);
        if (a < alpha) { alpha = a; blk_bound = i; blk_row = -1; blk_side = +1; }
      } else {
        const double a = (qp.lo(i) - u(i)) / p(i);
        if (a < alpha || (a == alpha && blk_side == +1)) {
          alpha = a; blk_bound = i; blk_row = -1; blk_side = -1;
        }
      }
    }
    for (int j = 0; j < nr; ++j) {
      if (rstat[static_cast<size_t>(j)] != 0) continue;
      const double s = qp.A.row(j).dot(p);
      if (s > 1e-14) {
        const double a = (qp.r_hi(j) - qp.A.row(j).dot(u)) / s;
        if (a < alpha) { alpha = a; blk_bound = -1; blk_row = j; blk_side = +1; }
      } else if (s < -1e-14) {
        const double a = (qp.r_lo(j) - qp.A.row(j).dot(u)) / s;
        if (a < alpha) { alpha = a; blk_bound = -1; blk_row = j; blk_side = -1; }
      }
    }
    alpha = std::max(alpha, 0.0);
    u += alpha * p;
    if (blk_bound >= 0) {
      u(blk_bound) = blk_side == -1 ? qp.lo(blk_bound) : qp.hi(blk_bound);
      bstat[static_cast<size_t>(blk_bound)] = blk_side;
    } else if (blk_row >= 0) {
      rstat[static_cast<size_t>(blk_row)] = blk_side;
    }
  }

  throw NumericalError("solve_stacked_qp: iteration cap exceeded",
                       qp.gradient(u).lpNorm<Eigen::Infinity>());
}

}  // namespace dmpc::qp
