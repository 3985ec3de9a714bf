#include "dmpc/admm.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

namespace dmpc::admm {

void AdmmConfig::validate() const {
  if (!(rho > 0)) throw ParameterError("AdmmConfig: rho must be positive");
  if (max_iter < 1) throw ParameterError("AdmmConfig: max_iter must be >= 1");
  if (explore_iters < 0 || explore_iters > max_iter) {
    throw ParameterError("AdmmConfig: explore_iters must lie in [0, max_iter]");
  }
  if ((c_max.array() < 0).any()) throw ParameterError("AdmmConfig: c_max must be nonnegative");
}

Eigen::VectorXd AdmmState::sum_u() const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(z.size());
  for (const auto& ui : u) s += ui;
  return s;
}

Eigen::VectorXd local_update(const LocalQuadratic& problem, const Eigen::VectorXd& sum_others,
                             const Eigen::VectorXd& z, const Eigen::VectorXd& theta,
                             double rho, const Eigen::VectorXd& warm) {
  const auto n = problem.g.size();
  qp::BoxQp aug;
  aug.H = problem.H + rho * Eigen::MatrixXd::Identity(n, n);
  aug.g = problem.g + rho * (sum_others - z + theta);
  aug.lo = problem.lo;
  aug.hi = problem.hi;
  return qp::solve_box_qp(aug, warm).u;
}

Eigen::VectorXd z_update(const Eigen::VectorXd& sum_u, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& c_max) {
  return (sum_u + theta).cwiseMax(0.0).cwiseMin(c_max);
}

Eigen::VectorXd dual_update(const Eigen::VectorXd& theta, const Eigen::VectorXd& sum_u_new,
                            const Eigen::VectorXd& z_new) {
  return theta + sum_u_new - z_new;
}

double residual(const std::vector<Eigen::VectorXd>& u_old,
                const std::vector<Eigen::VectorXd>& u_new) {
  if (u_old.size() != u_new.size() || u_old.empty()) {
    throw ParameterError("residual: iterate count mismatch");
  }
  double s = 0;
  for (size_t i = 0; i < u_old.size(); ++i) {
    s += (u_new[i] - u_old[i]).lpNorm<1>();
  }
  return s / static_cast<double>(u_old.size());
}

namespace {

// Runs fn(i) for i in [0, m) over up to `jobs` threads. Each index writes
// only its own output slot, so scheduling does not affect results.
void parallel_for(int m, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, m));
  if (jobs == 1) {
    for (int i = 0; i < m; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < m; i += jobs) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

AdmmRunResult run(std::vector<LocalQuadratic> problems, const AdmmConfig& cfg,
                  const std::vector<Eigen::VectorXd>& warm, int jobs,
                  const IterationLog& log, const RebuildHook& rebuild) {
  cfg.validate();
  const int M = static_cast<int>(problems.size());
  if (M == 0) throw ParameterError("admm::run: no zones");
  if (warm.size() != problems.size()) throw ParameterError("admm::run: warm-start count mismatch");
  const auto n = cfg.c_max.size();

  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();

  AdmmRunResult res;
  AdmmState& st = res.state;
  st.u.resize(static_cast<size_t>(M));
  for (int i = 0; i < M; ++i) {
    if (warm[static_cast<size_t>(i)].size() != n) {
      throw ParameterError("admm::run: warm-start dimension mismatch");
    }
    st.u[static_cast<size_t>(i)] = warm[static_cast<size_t>(i)]
                                       .cwiseMax(problems[static_cast<size_t>(i)].lo)
                                       .cwiseMin(problems[static_cast<size_t>(i)].hi);
  }
  st.theta = Eigen::VectorXd::Zero(n);
  st.z = Eigen::VectorXd::Zero(n);
  st.z = st.sum_u().cwiseMax(0.0).cwiseMin(cfg.c_max);

  std::vector<Eigen::VectorXd> u_new(static_cast<size_t>(M));
  std::vector<double> zone_seconds(static_cast<size_t>(M), 0.0);

  for (st.tau = 0; st.tau < cfg.max_iter; ++st.tau) {
    if (rebuild && st.tau < cfg.explore_iters) rebuild(st.tau, st.u, problems);

    const Eigen::VectorXd sum_old = st.sum_u();
    parallel_for(M, jobs, [&](int i) {
      const auto t0 = clock::now();
      const auto& ui = st.u[static_cast<size_t>(i)];
      u_new[static_cast<size_t>(i)] =
          local_update(problems[static_cast<size_t>(i)], sum_old - ui, st.z, st.theta,
                       cfg.rho, ui);
      zone_seconds[static_cast<size_t>(i)] =
          std::chrono::duration<double>(clock::now() - t0).count();
    });
    res.max_sequential_seconds +=
        *std::max_element(zone_seconds.begin(), zone_seconds.end());

    // z projects the freshly updated sum: the old-iterate ordering is
    // linearly unstable at this penalty for large zone counts (the
    // consensus error is overcorrected by every zone at once).
    Eigen::VectorXd sum_new = Eigen::VectorXd::Zero(n);
    for (const auto& ui : u_new) sum_new += ui;
    st.z = z_update(sum_new, st.theta, cfg.c_max);
    st.theta = dual_update(st.theta, sum_new, st.z);

    const double r = residual(st.u, u_new);
    st.u = u_new;
    st.r_history.push_back(r);

    if (log) {
      double obj = 0;
      for (int i = 0; i < M; ++i) {
        obj += problems[static_cast<size_t>(i)].objective(st.u[static_cast<size_t>(i)]);
      }
      const double viol = std::max((sum_new - cfg.c_max).maxCoeff(), (-sum_new).maxCoeff());
      log(st.tau, r, obj, std::max(viol, 0.0));
    }
    if (r < cfg.tol) {
      res.converged = true;
      ++st.tau;
      break;
    }
  }

  for (int i = 0; i < M; ++i) {
    res.objective += problems[static_cast<size_t>(i)].objective(st.u[static_cast<size_t>(i)]);
  }
  res.wall_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  return res;
}

}  // namespace dmpc::admm
