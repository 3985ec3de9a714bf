#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dmpc/errors.hpp"

namespace dmpc::qp {

/// Strictly convex quadratic over a box:
///   min 1/2 u'Hu + g'u  s.t.  lo <= u <= hi.
struct BoxQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::VectorXd lo, hi;

  void validate() const;
  double objective(const Eigen::VectorXd& u) const {
    return 0.5 * u.dot(H * u) + g.dot(u);
  }
};

struct BoxQpResult {
  Eigen::VectorXd u;
  int iterations = 0;
};

/// Primal active-set solver with a dense Cholesky core. The warm point is
/// clamped into the box. KKT tolerance 1e-8 absolute; throws NumericalError
/// past the iteration cap.
BoxQpResult solve_box_qp(const BoxQp& qp, const Eigen::VectorXd& warm);

/// Halfspace intersection {u : A u <= b}, used only for membership queries.
struct Polyhedron {
  Eigen::MatrixXd A;  // R x N (R may be 0)
  Eigen::VectorXd b;  // R

  int rows() const { return static_cast<int>(A.rows()); }
};

/// min over rows of (b - a.u); positive iff strictly interior. An empty
/// polyhedron has margin +infinity.
double membership_margin(const Polyhedron& poly, const Eigen::VectorXd& u);

/// Convex QP with block-diagonal Hessian, box bounds, and a few two-sided
/// general rows:
///   min 1/2 u'Hu + g'u   s.t.  lo <= u <= hi,  r_lo <= A u <= r_hi,
/// where H = blkdiag(H_blocks). Used for the centralized strategies, where
/// the general rows carry the shared per-step power budget.
struct StackedQp {
  std::vector<Eigen::MatrixXd> H_blocks;
  Eigen::VectorXd g;
  Eigen::VectorXd lo, hi;
  Eigen::MatrixXd A;     // R x N general rows (R may be 0)
  Eigen::VectorXd r_lo;  // R
  Eigen::VectorXd r_hi;  // R

  int dim() const { return static_cast<int>(g.size()); }
  void validate() const;
  double objective(const Eigen::VectorXd& u) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const;
};

struct StackedQpResult {
  Eigen::VectorXd u;
  int iterations = 0;
  std::vector<int> active_rows;  // general rows active at the solution
};

/// Primal active-set solver for StackedQp; general rows handled through a
/// Schur complement over the per-block Cholesky factors.
StackedQpResult solve_stacked_qp(const StackedQp& qp, const Eigen::VectorXd& warm);

}  // namespace dmpc::qp
