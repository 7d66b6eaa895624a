#pragma once

#include <cmath>
#include <string>

#include "bary/simplex.hpp"
#include "bary/sinkhorn.hpp"
#include "bary/trace.hpp"
#include "bary/transport.hpp"

namespace bary {

struct GradientResult {
  Vector grad;
  bool unstable = false;
  long iterations = 0;
};

/// Gradient in r of the entropic cost L^gamma(r, c): gamma * u from the
/// Sinkhorn row potential, mean-centred. This is -lambda for the dual
/// variable lambda of the regularized Kantorovich problem.
inline GradientResult sinkhorn_gradient(const Vector& r, const Vector& c, const CostMatrix& C, double gamma,
                                        const SinkhornOptions& opt = {}) {
  const SinkhornSolution sol = sinkhorn(r, c, C, gamma, opt);
  GradientResult out;
  out.grad = gamma * (sol.u.array() - sol.u.mean()).matrix();
  out.unstable = sol.unstable;
  out.iterations = sol.iterations;
  return out;
}

/// Subgradient in r of L_C(r, c): -lambda from the exact duals, mean-centred.
/// With the dual form -<lambda, r> - <mu, c> this satisfies
/// L(r', c) >= L(r, c) + <g, r' - r> for every r' on the simplex.
inline Vector lp_subgradient(const Vector& r, const Vector& c, const CostMatrix& C, const ExactOtOptions& opt = {}) {
  const OtSolution sol = exact_ot(r, c, C, opt);
  const Vector g = -sol.dual_lambda;
  return (g.array() - g.mean()).matrix();
}

enum class BaselineMethod { sinkhorn_sgd, lp_sgd };
enum class ScheduleKind { constant, inverse_sqrt };
enum class Stepper { entropic, euclidean };

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::sinkhorn_sgd;
  double gamma = 1e-2;
  long inner_iters = 100;
  double inner_tol = 1e-9;
  ScheduleKind schedule = ScheduleKind::inverse_sqrt;
  double step = 1.0;  // eta for constant, c in c / sqrt(k) for inverse_sqrt
  Stepper stepper = Stepper::entropic;
  ExactOtOptions exact{};

  void validate(std::size_t n) const {
    if (method == BaselineMethod::sinkhorn_sgd) {
      if (!(gamma > 0.0)) throw PreconditionError("sinkhorn_sgd: gamma must be positive");
      if (inner_iters < 1) throw PreconditionError("sinkhorn_sgd: inner_iters must be >= 1");
    } else if (n > exact.max_n) {
      throw PreconditionError("lp_sgd: n = " + std::to_string(n) + " exceeds the exact-solver cap " +
                              std::to_string(exact.max_n));
    }
    if (!(step > 0.0)) throw PreconditionError("baseline: step must be positive");
  }

  double eta(long k) const {
    return schedule == ScheduleKind::constant ? step : step / std::sqrt(static_cast<double>(k));
  }
};

struct BaselineState {
  Vector log_r, r, r_avg;
  long k = 0;
  long unstable_steps = 0;
  double last_eta = 0.0;

  static BaselineState uniform(Eigen::Index n) {
    BaselineState s;
    s.log_r = Vector::Zero(n);
    s.r = Vector::Constant(n, 1.0 / static_cast<double>(n));
    s.r_avg = s.r;
    return s;
  }
};

inline Vector baseline_gradient(const BaselineState& s, const Vector& c, const CostMatrix& C,
                                const BaselineConfig& cfg, bool& unstable) {
  unstable = false;
  if (cfg.method == BaselineMethod::lp_sgd) return lp_subgradient(s.r, c, C, cfg.exact);
  SinkhornOptions so;
  so.max_iter = cfg.inner_iters;
  so.tol = cfg.inner_tol;
  so.check_every = 10;
  const GradientResult g = sinkhorn_gradient(floor_clamped(s.r), floor_clamped(c), C, cfg.gamma, so);
  unstable = g.unstable;
  return g.grad;
}

/// One stochastic step: gradient at the current r, entropic (exponential
/// weights) or Euclidean (projected) step, arithmetic running average.
inline void baseline_step(BaselineState& s, const Vector& c, const CostMatrix& C, const BaselineConfig& cfg) {
  bool unstable = false;
  const Vector grad = baseline_gradient(s, c, C, cfg, unstable);
  const long k = s.k + 1;
  const double eta = cfg.eta(k);
  if (cfg.stepper == Stepper::entropic) {
    s.log_r -= eta * grad;
    detail::recentre_log(s.log_r);
    detail::weights_from_log(s.log_r, s.r);
  } else {
    s.r = detail::project_simplex(s.r - eta * grad);
    s.log_r = s.r.array().log().matrix();
  }
  s.r_avg = (1.0 / static_cast<double>(k)) * s.r + (static_cast<double>(k - 1) / static_cast<double>(k)) * s.r_avg;
  s.k = k;
  s.last_eta = eta;
  if (unstable) ++s.unstable_steps;
  if (!s.r.allFinite())
    throw NumericalError("baseline: non-finite iterate at step " + std::to_string(k));
}

struct BaselineRunResult {
  Vector r_avg;
  Trace trace;
  long unstable_steps = 0;
};

inline BaselineRunResult run_baseline(MeasureStream& stream, const CostMatrix& C, const BaselineConfig& cfg, long N,
                                      long trace_every = 0) {
  if (N < 1) throw PreconditionError("baseline: N must be >= 1");
  cfg.validate(C.size());
  BaselineState s = BaselineState::uniform(static_cast<Eigen::Index>(C.size()));
  BaselineRunResult out;
  Stopwatch clock;
  for (long k = 1; k <= N; ++k) {
    auto d = stream.sample();
    if (!d) break;
    baseline_step(s, d->measure.weights(), C, cfg);
    if ((trace_every > 0 && k % trace_every == 0) || k == N)
      out.trace.push_back({s.k, s.last_eta, std::nullopt, clock.elapsed_ns(), std::nullopt});
  }
  out.r_avg = s.r_avg;
  out.unstable_steps = s.unstable_steps;
  return out;
}

}  // namespace bary
