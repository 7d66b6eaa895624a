#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "bary/cost.hpp"

namespace bary {

struct SinkhornOptions {
  long max_iter = 1000;
  double tol = 1e-9;
  /// Residual is evaluated every `check_every` iterations.
  long check_every = 1;
  bool record_history = false;
  /// Optional warm start for the column potential.
  Vector init_v;
};

/// Entropic OT solution in scaling form: plan = diag(e^u) exp(-C/gamma) diag(e^v).
struct SinkhornSolution {
  Vector u, v;
  Matrix plan;
  /// Value of the entropic dual objective
  ///   gamma * (<u, r> + <v, c> - sum(plan)) + gamma,
  /// which equals L^gamma_C(r, c) at the optimum.
  double reg_value = 0.0;
  double transport_cost = 0.0;  // <C, plan>
  double marginal_residual = 0.0;
  long iterations = 0;
  bool converged = false;
  bool unstable = false;
  std::vector<double> dual_history;
};

namespace detail {

inline double log_sum_exp(const double* x, Eigen::Index n, Eigen::Index stride) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) m = std::max(m, x[k * stride]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) s += std::exp(x[k * stride] - m);
  return m + std::log(s);
}

}  // namespace detail

/// Log-domain Sinkhorn iterations with max-subtracted log-sum-exp.
/// Requires strictly positive marginals.
inline SinkhornSolution sinkhorn(const Vector& r, const Vector& c, const CostMatrix& C, double gamma,
                                 const SinkhornOptions& opt = {}) {
  const auto n = static_cast<Eigen::Index>(C.size());
  if (r.size() != n || c.size() != n) throw PreconditionError("sinkhorn: size mismatch");
  if (!(gamma > 0.0)) throw PreconditionError("sinkhorn: gamma must be positive");
  if (!(r.array() > 0.0).all() || !(c.array() > 0.0).all())
    throw PreconditionError("sinkhorn: marginals must be strictly positive (floor-clamp first)");

  const Matrix logk = -C.entries() / gamma;  // column-major: logk.col(j) contiguous
  const Matrix logk_t = logk.transpose();
  const Vector log_r = r.array().log().matrix();
  const Vector log_c = c.array().log().matrix();

  SinkhornSolution sol;
  Vector u = Vector::Zero(n);
  Vector v = (opt.init_v.size() == n) ? opt.init_v : Vector::Zero(n);
  Vector work(n);

  const auto row_lse = [&](const Vector& vv, Eigen::Index i) {
    // log sum_j exp(logk(i, j) + v_j); row i of logk is column i of logk_t.
    for (Eigen::Index j = 0; j < n; ++j) work[j] = logk_t(j, i) + vv[j];
    return detail::log_sum_exp(work.data(), n, 1);
  };
  const auto col_lse = [&](const Vector& uu, Eigen::Index j) {
    for (Eigen::Index i = 0; i < n; ++i) work[i] = logk(i, j) + uu[i];
    return detail::log_sum_exp(work.data(), n, 1);
  };
  const auto dual_value = [&](const Vector& uu, const Vector& vv) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) total += std::exp(vv[j] + col_lse(uu, j));
    return gamma * (uu.dot(r) + vv.dot(c) - total) + gamma;
  };
  const auto row_residual = [&](const Vector& uu, const Vector& vv) {
    double res = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) res += std::abs(std::exp(uu[i] + row_lse(vv, i)) - r[i]);
    return res;
  };

  Vector u_prev = u, v_prev = v;
  long it = 0;
  for (; it < opt.max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) u[i] = log_r[i] - row_lse(v, i);
    for (Eigen::Index j = 0; j < n; ++j) v[j] = log_c[j] - col_lse(u, j);
    if (!u.allFinite() || !v.allFinite()) {
      u = u_prev;
      v = v_prev;
      sol.unstable = true;
      break;
    }
    u_prev = u;
    v_prev = v;
    if (opt.record_history) sol.dual_history.push_back(dual_value(u, v));
    if ((it + 1) % std::max<long>(1, opt.check_every) == 0 && row_residual(u, v) <= opt.tol) {
      ++it;
      sol.converged = true;
      break;
    }
  }
  sol.iterations = it;

  sol.plan.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sol.plan(i, j) = std::exp(u[i] + logk(i, j) + v[j]);
  const Vector rows = sol.plan.rowwise().sum(), cols = sol.plan.colwise().sum().transpose();
  sol.marginal_residual = (rows - r).lpNorm<1>() + (cols - c).lpNorm<1>();
  if (sol.marginal_residual <= opt.tol) sol.converged = true;
  sol.reg_value = gamma * (u.dot(r) + v.dot(c) - sol.plan.sum()) + gamma;
  sol.transport_cost = (sol.plan.array() * C.entries().array()).sum();
  sol.u = std::move(u);
  sol.v = std::move(v);
  return sol;
}

}  // namespace bary
