#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "dmpc/errors.hpp"
#include "dmpc/qp.hpp"

namespace dmpc::admm {

struct AdmmConfig {
  double rho = 0.1;         // penalty, per-kW scale
  int max_iter = 80;        // T
  int explore_iters = 30;   // T_d: window in which subproblems may be rebuilt
  double tol = 1e-3;        // threshold on residual r
  Eigen::VectorXd c_max;    // shared per-step budget

  void validate() const;
};

/// One zone's quadratic cost before the consensus penalty:
///   1/2 u'Hu + g'u + c0  over lo <= u <= hi.
struct LocalQuadratic {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::VectorXd lo, hi;
  double c0 = 0;

  double objective(const Eigen::VectorXd& u) const {
    return 0.5 * u.dot(H * u) + g.dot(u) + c0;
  }
};

struct AdmmState {
  std::vector<Eigen::VectorXd> u;  // per-zone iterates
  Eigen::VectorXd z;               // auxiliary consensus variable
  Eigen::VectorXd theta;           // scaled dual
  int tau = 0;
  std::vector<double> r_history;

  Eigen::VectorXd sum_u() const;
};

/// Minimizes the augmented local objective of zone i against the iterate-tau
/// values of the others (Jacobi update):
///   min 1/2 u'(H + rho I)u + (g + rho (sum_others - z + theta))'u.
Eigen::VectorXd local_update(const LocalQuadratic& problem, const Eigen::VectorXd& sum_others,
                             const Eigen::VectorXd& z, const Eigen::VectorXd& theta,
                             double rho, const Eigen::VectorXd& warm);

/// Projection of (sum_u + theta) onto [0, c_max].
Eigen::VectorXd z_update(const Eigen::VectorXd& sum_u, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& c_max);

/// theta + sum_u_new - z_new.
Eigen::VectorXd dual_update(const Eigen::VectorXd& theta, const Eigen::VectorXd& sum_u_new,
                            const Eigen::VectorXd& z_new);

/// r = (1/M) sum_i |u_new_i - u_old_i|_1.
double residual(const std::vector<Eigen::VectorXd>& u_old,
                const std::vector<Eigen::VectorXd>& u_new);

/// Per-iteration log record: (tau, r, objective, max budget violation).
using IterationLog = std::function<void(int, double, double, double)>;

/// Optional per-iteration hook, called before the local updates of
/// iterations tau < explore_iters; may mutate the subproblems (region
/// re-detection in the convex-ADMM strategy).
using RebuildHook = std::function<void(int tau, const std::vector<Eigen::VectorXd>& u,
                                       std::vector<LocalQuadratic>& problems)>;

struct AdmmRunResult {
  AdmmState state;
  bool converged = false;       // residual fell below tol
  double objective = 0;         // sum of local objectives at exit
  double wall_seconds = 0;
  double max_sequential_seconds = 0;  // sum over iterations of the slowest zone
};

/// Runs the scaled-dual consensus iteration until r < tol or max_iter.
/// Local updates of one iteration read only iterate-tau data and may fan
/// out over `jobs` threads; results are merged in fixed zone order, so
/// iterates are identical for every jobs value.
AdmmRunResult run(std::vector<LocalQuadratic> problems, const AdmmConfig& cfg,
                  const std::vector<Eigen::VectorXd>& warm, int jobs = 1,
                  const IterationLog& log = {}, const RebuildHook& rebuild = {});

}  // namespace dmpc::admm
