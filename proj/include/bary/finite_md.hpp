#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "bary/dual_bound.hpp"
#include "bary/simplex.hpp"
#include "bary/trace.hpp"

namespace bary {

/// Finite-support barycenter problem: m measures with a law over their
/// indices, a shared cost, and the box |M_tj| <= box_bound for the dual.
struct FiniteProblem {
  std::vector<Vector> measures;
  Vector weights;
  CostMatrix C;
  double box_bound;

  FiniteProblem(std::vector<Vector> ms, Vector w, CostMatrix cost)
      : measures(std::move(ms)), weights(std::move(w)), C(std::move(cost)), box_bound(C.inf_norm()) {
    if (measures.empty()) throw PreconditionError("FiniteProblem: no measures");
    if (static_cast<std::size_t>(weights.size()) != measures.size())
      throw PreconditionError("FiniteProblem: weight count differs from measure count");
    DiscreteMeasure check_w(weights);
    for (const auto& c : measures) {
      if (static_cast<std::size_t>(c.size()) != C.size())
        throw PreconditionError("FiniteProblem: measure dimension differs from cost size");
      DiscreteMeasure check_c(c);
    }
  }

  Eigen::Index m() const { return static_cast<Eigen::Index>(measures.size()); }
  Eigen::Index n() const { return static_cast<Eigen::Index>(C.size()); }
};

struct FiniteStepConstants {
  double alpha = 0.0;
  double beta = 0.0;
  double eta = 0.0;
};

/// alpha = 2 log n, beta = 4 m n ||C||, eta = 2 / (||C|| sqrt(8 n^2 log n + 16 m n) sqrt(5 N)),
/// with eta multiplied by `eta_scale`.
inline FiniteStepConstants finite_constants(const FiniteProblem& p, long N, double eta_scale = 1.0) {
  if (N < 1) throw PreconditionError("finite_md: N must be >= 1");
  if (!(p.C.inf_norm() > 0.0)) throw PreconditionError("finite_md: cost matrix is identically zero");
  const double n = static_cast<double>(p.n()), m = static_cast<double>(p.m());
  const double B = p.C.inf_norm();
  FiniteStepConstants k;
  k.alpha = 2.0 * std::log(n);
  k.beta = 4.0 * m * n * B;
  k.eta = eta_scale * 2.0 / (B * std::sqrt(8.0 * n * n * std::log(n) + 16.0 * m * n) * std::sqrt(5.0 * static_cast<double>(N)));
  return k;
}

/// Iterate of the finite-support mirror descent. r is kept as log weights;
/// the running mean of M is maintained lazily (each row is folded into the
/// sum only when it changes or when the mean is read).
struct FiniteSaddleState {
  Vector log_r, r, r_avg;
  Matrix M;
  long k = 0;
  double eta = 0.0, alpha = 0.0, beta = 0.0;
  Rng rng;

  Matrix M_sum;                 // sum over past iterates, rows current up to last_touch
  std::vector<long> last_touch;  // step at which each row was last folded in

  Matrix M_avg() const {
    if (k == 0) return M;
    Matrix out = M_sum;
    for (Eigen::Index t = 0; t < M.rows(); ++t)
      out.row(t) += static_cast<double>(k - last_touch[static_cast<std::size_t>(t)]) * M.row(t);
    return out / static_cast<double>(k);
  }
};

inline FiniteSaddleState init_finite_state(const FiniteProblem& p, long N, std::uint64_t seed,
                                           double eta_scale = 1.0) {
  const auto consts = finite_constants(p, N, eta_scale);
  FiniteSaddleState s;
  s.log_r = Vector::Zero(p.n());
  s.r = Vector::Constant(p.n(), 1.0 / static_cast<double>(p.n()));
  s.r_avg = s.r;
  s.M = Matrix::Zero(p.m(), p.n());
  s.M_sum = Matrix::Zero(p.m(), p.n());
  s.last_touch.assign(static_cast<std::size_t>(p.m()), 0);
  s.eta = consts.eta;
  s.alpha = consts.alpha;
  s.beta = consts.beta;
  s.rng = Rng(seed);
  return s;
}

struct OracleG {
  Eigen::Index s = 0;
  double value = 0.0;
};

/// g_s = -n max_j (-C_sj - M_tj); the only non-zero coordinate of the
/// primal stochastic gradient.
inline OracleG oracle_g(const Matrix& M, Eigen::Index t, Eigen::Index s, const CostMatrix& C) {
  const auto n = static_cast<Eigen::Index>(C.size());
  double best = -C(s, 0) - M(t, 0);
  for (Eigen::Index j = 1; j < n; ++j) best = std::max(best, -C(s, j) - M(t, j));
  return {s, -static_cast<double>(n) * best};
}

/// Lowest-index argmax of -C_qj - M_tj.
inline Eigen::Index oracle_argmax(const Matrix& M, Eigen::Index t, Eigen::Index q, const CostMatrix& C) {
  const auto n = static_cast<Eigen::Index>(C.size());
  Eigen::Index arg = 0;
  double best = -C(q, 0) - M(t, 0);
  for (Eigen::Index j = 1; j < n; ++j) {
    const double v = -C(q, j) - M(t, j);
    if (v > best) {
      best = v;
      arg = j;
    }
  }
  return arg;
}

/// h = c_t - e_{J_q}; the dual stochastic gradient for row t.
inline Vector oracle_h(const Matrix& M, Eigen::Index t, Eigen::Index q, const Vector& c_t, const CostMatrix& C) {
  Vector h = c_t;
  h[oracle_argmax(M, t, q, C)] -= 1.0;
  return h;
}

namespace detail {

inline std::string dump_finite_state(const FiniteSaddleState& s) {
  std::ostringstream os;
  os.precision(17);
  os << "k=" << s.k << " eta=" << s.eta << "\nlog_r=" << s.log_r.transpose() << "\nM=\n" << s.M;
  return os.str();
}

}  // namespace detail

/// One iteration: draw t ~ weights, s ~ U[n], q ~ r, then the coordinate
/// exponential step on r, the box-clipped step on row t of M, and the
/// running average.
inline void md_step(FiniteSaddleState& s, const FiniteProblem& p) {
  const Eigen::Index n = p.n();
  const auto t = static_cast<Eigen::Index>(
      s.rng.categorical(std::span<const double>(p.weights.data(), static_cast<std::size_t>(p.weights.size()))));
  const auto si = static_cast<Eigen::Index>(s.rng.index(static_cast<std::size_t>(n)));
  const auto q = static_cast<Eigen::Index>(
      s.rng.categorical(std::span<const double>(s.r.data(), static_cast<std::size_t>(n))));

  const OracleG g = oracle_g(s.M, t, si, p.C);
  const Vector h = oracle_h(s.M, t, q, p.measures[static_cast<std::size_t>(t)], p.C);

  const long k = s.k + 1;
  // Fold the untouched stretch of row t into the running sum before it changes.
  auto& last = s.last_touch[static_cast<std::size_t>(t)];
  s.M_sum.row(t) += static_cast<double>(k - 1 - last) * s.M.row(t);

  s.log_r[g.s] -= s.alpha * s.eta * g.value;
  detail::recentre_log(s.log_r);
  detail::weights_from_log(s.log_r, s.r);

  s.M.row(t) -= s.beta * s.eta * h.transpose();
  s.M.row(t) = s.M.row(t).cwiseMax(-p.box_bound).cwiseMin(p.box_bound);

  s.M_sum.row(t) += s.M.row(t);
  last = k;

  s.r_avg = (1.0 / static_cast<double>(k)) * s.r + (static_cast<double>(k - 1) / static_cast<double>(k)) * s.r_avg;
  s.k = k;

  if (!s.log_r.allFinite() || !s.r.allFinite() || !s.M.row(t).allFinite())
    throw NumericalError("md_step: non-finite iterate at step " + std::to_string(k), detail::dump_finite_state(s));
}

/// max over the box of F(r, .) minus min over the simplex of F(., M), with
/// F(r, M) = sum_t w_t [-<lambda*(M_t), r> - <M_t, c_t>].
inline double duality_gap_finite(const Vector& r, const Matrix& M, const FiniteProblem& p,
                                 const ExactOtOptions& opt = {}) {
  if (p.C.size() > opt.max_n)
    throw PreconditionError("duality_gap_finite: n exceeds exact-solver cap " + std::to_string(opt.max_n));
  if (M.rows() != p.m() || M.cols() != p.n()) throw PreconditionError("duality_gap_finite: M has wrong shape");
  double upper = 0.0;
  Vector expected_neg_lambda = Vector::Zero(p.n());
  double linear = 0.0;
  for (Eigen::Index t = 0; t < p.m(); ++t) {
    const auto& c = p.measures[static_cast<std::size_t>(t)];
    const double w = p.weights[t];
    if (w == 0.0) continue;
    upper += w * box_dual(r, c, p.C, p.box_bound, opt).value;
    const Vector row = M.row(t).transpose();
    expected_neg_lambda -= w * lambda_star(row, p.C);
    linear += w * row.dot(c);
  }
  const double lower = expected_neg_lambda.minCoeff() - linear;
  return upper - lower;
}

struct FiniteRunOptions {
  double eta_scale = 1.0;
  /// Evaluate the duality gap every this many steps (0: never).
  long gap_every = 0;
  /// Record a trace row every this many steps (0: only gap rows and the last step).
  long trace_every = 0;
  ExactOtOptions exact{};
};

struct FiniteRunResult {
  Vector r_avg;
  Matrix M_avg;
  Trace trace;
  FiniteSaddleState state;
};

inline FiniteRunResult run_finite(const FiniteProblem& p, long N, std::uint64_t seed, const FiniteRunOptions& opt = {}) {
  FiniteSaddleState s = init_finite_state(p, N, seed, opt.eta_scale);
  Trace trace;
  Stopwatch clock;
  for (long k = 1; k <= N; ++k) {
    md_step(s, p);
    const bool gap_row = opt.gap_every > 0 && (k % opt.gap_every == 0 || k == N);
    const bool plain_row = (opt.trace_every > 0 && k % opt.trace_every == 0) || k == N;
    if (gap_row || plain_row) {
      TraceRow row{k, s.eta, std::nullopt, clock.elapsed_ns(), std::nullopt};
      if (gap_row) row.gap = duality_gap_finite(s.r_avg, s.M_avg(), p, opt.exact);
      trace.push_back(row);
    }
  }
  FiniteRunResult out{s.r_avg, s.M_avg(), std::move(trace), s};
  return out;
}

}  // namespace bary
