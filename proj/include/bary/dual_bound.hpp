#pragma once

#include "bary/lp.hpp"
#include "bary/transport.hpp"

namespace bary {

/// Maximizer of the Kantorovich dual with mu restricted to a box.
struct BoxDualSolution {
  double value = 0.0;
  Vector lambda;
  Vector mu;
  bool from_exact_ot = false;  // fast path: exact duals already fit the box
};

/// Solves  max -<lambda, r> - <mu, c>  s.t.  lambda_i + mu_j >= -C_ij,  lo <= mu <= hi
/// as a dense LP. Substituting mu = lo + y and lambda = lambda*(lo) - z
/// (lambda never needs to exceed lambda*(lo) once mu >= lo) makes the origin
/// feasible.
inline BoxDualSolution box_dual_lp(const Vector& r, const Vector& c, const CostMatrix& C, const Vector& lo,
                                   const Vector& hi) {
  const auto n = static_cast<Eigen::Index>(C.size());
  if (r.size() != n || c.size() != n || lo.size() != n || hi.size() != n)
    throw PreconditionError("box_dual_lp: size mismatch");
  if ((hi.array() < lo.array()).any()) throw PreconditionError("box_dual_lp: empty box");
  const Vector lambda0 = lambda_star(lo, C);

  // x = [z (n), y (n)]
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n * n + n, 2 * n);
  Eigen::VectorXd b(n * n + n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index row = i * n + j;
      A(row, i) = 1.0;
      A(row, n + j) = -1.0;
      b[row] = std::max(0.0, C(i, j) + lo[j] + lambda0[i]);
    }
  for (Eigen::Index j = 0; j < n; ++j) {
    A(n * n + j, n + j) = 1.0;
    b[n * n + j] = hi[j] - lo[j];
  }
  Eigen::VectorXd obj(2 * n);
  obj << r, -c;

  const LpResult lp = solve_lp(A, b, obj);
  if (lp.status != LpResult::Status::optimal)
    throw NumericalError(lp.status == LpResult::Status::unbounded ? "box_dual_lp: unbounded (zero marginal?)"
                                                                  : "box_dual_lp: pivot limit reached");
  BoxDualSolution sol;
  sol.mu = lo + lp.x.tail(n);
  sol.lambda = lambda_star(sol.mu, C);
  sol.value = -sol.lambda.dot(r) - sol.mu.dot(c);
  return sol;
}

/// Box-constrained dual maximizer with |mu_j| <= bound. Tries the exact
/// transport duals first (shifted to the centre of the box under the gauge
/// (lambda + a, mu - a)); falls back to the LP when they do not fit.
inline BoxDualSolution box_dual(const Vector& r, const Vector& c, const CostMatrix& C, double bound,
                                const ExactOtOptions& opt = {}) {
  const auto n = static_cast<Eigen::Index>(C.size());
  if (C.size() > opt.max_n)
    throw PreconditionError("box_dual: n exceeds exact-solver cap " + std::to_string(opt.max_n));
  if (std::abs(r.sum() - c.sum()) <= opt.feasibility_tol) {
    const OtSolution ot = exact_ot(r, c, C, opt);
    const double shift = 0.5 * (ot.dual_mu.maxCoeff() + ot.dual_mu.minCoeff());
    Vector mu = ot.dual_mu.array() - shift;
    if (mu.cwiseAbs().maxCoeff() <= bound) {
      BoxDualSolution sol;
      sol.mu = std::move(mu);
      sol.lambda = lambda_star(sol.mu, C);
      sol.value = -sol.lambda.dot(r) - sol.mu.dot(c);
      sol.from_exact_ot = true;
      return sol;
    }
  }
  return box_dual_lp(r, c, C, Vector::Constant(n, -bound), Vector::Constant(n, bound));
}

struct DualBoundCertificate {
  bool certified = false;
  double exact_value = 0.0;
  double box_value = 0.0;
  Vector witness_mu;
};

/// Checks on one instance that the dual optimum is attained with
/// 0 <= mu <= ||C||_inf (min mu = 0 normalization), by comparing the
/// box-restricted dual LP with the unrestricted transport value.
inline DualBoundCertificate certify_dual_bound(const Vector& r, const Vector& c, const CostMatrix& C,
                                               double tol = 1e-7, const ExactOtOptions& opt = {}) {
  if (!(r.array() > 0.0).all() || !(c.array() > 0.0).all())
    throw PreconditionError("certify_dual_bound: marginals must be strictly positive");
  const auto n = static_cast<Eigen::Index>(C.size());
  DualBoundCertificate cert;
  cert.exact_value = exact_ot(r, c, C, opt).value;
  const BoxDualSolution box = box_dual_lp(r, c, C, Vector::Zero(n), Vector::Constant(n, C.inf_norm()));
  cert.box_value = box.value;
  cert.witness_mu = box.mu;
  cert.certified = std::abs(cert.box_value - cert.exact_value) <= tol;
  return cert;
}

}  // namespace bary
