#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bary/cost.hpp"
#include "bary/simplex.hpp"
#include "bary/trace.hpp"

namespace bary {

enum class KernelFamily { rbf, diffusion, linear };

/// Kernel on the simplex with its constants. kappa_sq = sup k(x, x) is 1 for
/// all three families. r_sq is the RKHS radius constant; for the linear
/// family it is derived from the cost (see effective_r_sq).
struct Kernel {
  KernelFamily family = KernelFamily::rbf;
  double param = 1e-3;  // s for rbf, t for diffusion, unused for linear
  double kappa_sq = 1.0;
  double r_sq = 25.0;

  static Kernel rbf(double s = 1e-3, double r_sq = 25.0) { return validated({KernelFamily::rbf, s, 1.0, r_sq}); }
  static Kernel diffusion(double t = 1e3, double r_sq = 25.0) {
    return validated({KernelFamily::diffusion, t, 1.0, r_sq});
  }
  static Kernel linear() { return {KernelFamily::linear, 0.0, 1.0, 0.0}; }

  double operator()(const Vector& x, const Vector& y) const {
    switch (family) {
      case KernelFamily::rbf: return std::exp(-param * (x - y).squaredNorm());
      case KernelFamily::diffusion: {
        const double ip = std::clamp((x.array().sqrt() * y.array().sqrt()).sum(), 0.0, 1.0);
        const double a = std::acos(ip);
        return std::exp(-a * a / param);
      }
      case KernelFamily::linear: return x.dot(y);
    }
    return 0.0;
  }

 private:
  static Kernel validated(Kernel k) {
    if (!(k.param > 0.0)) throw PreconditionError("Kernel: parameter must be positive");
    if (!(k.r_sq > 0.0)) throw PreconditionError("Kernel: R^2 must be positive");
    return k;
  }
};

inline const char* to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::rbf: return "rbf";
    case KernelFamily::diffusion: return "diffusion";
    case KernelFamily::linear: return "linear";
  }
  return "?";
}

inline double kernel_eval(const Kernel& k, const Vector& x, const Vector& y) { return k(x, y); }

/// R^2 entering the stepsize: configured for rbf/diffusion, 2 n^2 ||C||^2 for linear.
inline double effective_r_sq(const Kernel& k, const CostMatrix& C) {
  if (k.family != KernelFamily::linear) return k.r_sq;
  const double n = static_cast<double>(C.size());
  return 2.0 * n * n * C.inf_norm() * C.inf_norm();
}

enum class StepMode { constant, dynamic };
enum class ClipMode { cost, unit };

struct KmdOptions {
  StepMode mode = StepMode::constant;
  /// Horizon N used by the constant stepsize.
  long horizon = 1;
  /// Multiplier on the theoretical stepsize (1 = theory).
  double eta_scale = 1.0;
  ClipMode clip = ClipMode::cost;
  /// Reject further steps once this many samples are stored (kernel runner only).
  std::optional<std::size_t> history_cap;
};

struct KmdConstants {
  double alpha = 0.0;       // 2 log n
  double beta_scale = 0.0;  // 2 n R^2
  double L = 0.0;           // sqrt(8 log n ||C||^2 + 8 n^2 kappa^2 R^2)
  double clip_bound = 0.0;
};

inline KmdConstants kmd_constants(const Kernel& k, const CostMatrix& C, const KmdOptions& opt) {
  if (!(C.inf_norm() > 0.0)) throw PreconditionError("kmd: cost matrix is identically zero");
  const double n = static_cast<double>(C.size());
  const double r_sq = effective_r_sq(k, C);
  const double B = C.inf_norm();
  KmdConstants out;
  out.alpha = 2.0 * std::log(n);
  out.beta_scale = 2.0 * n * r_sq;
  out.L = std::sqrt(8.0 * std::log(n) * B * B + 8.0 * n * n * k.kappa_sq * r_sq);
  out.clip_bound = (opt.clip == ClipMode::unit) ? 1.0 : B;
  return out;
}

/// Stepsize of step t (1-based): 2 / (L sqrt(5N)) for the constant mode,
/// sqrt(3) / (L sqrt(t)) for the dynamic mode; both times eta_scale.
inline double kmd_eta(const KmdConstants& k, const KmdOptions& opt, long t) {
  if (opt.mode == StepMode::constant) {
    if (opt.horizon < 1) throw PreconditionError("kmd: horizon N must be >= 1");
    return opt.eta_scale * 2.0 / (k.L * std::sqrt(5.0 * static_cast<double>(opt.horizon)));
  }
  return opt.eta_scale * std::sqrt(3.0) / (k.L * std::sqrt(static_cast<double>(t)));
}

/// Primal part shared by the kernel and matrix representations.
struct KmdPrimal {
  Vector log_r, r, r_avg;
  long k = 0;
  double weight_sum = 0.0;  // sum of stepsizes, for the dynamic average
  double last_eta = 0.0;

  static KmdPrimal uniform(Eigen::Index n) {
    KmdPrimal p;
    p.log_r = Vector::Zero(n);
    p.r = Vector::Constant(n, 1.0 / static_cast<double>(n));
    p.r_avg = p.r;
    return p;
  }
};

struct KmdState {
  std::vector<Vector> betas;
  std::vector<Vector> samples;
  KmdPrimal primal;

  std::size_t history_size() const { return samples.size(); }
};

struct LinearKmdState {
  Matrix theta;
  KmdPrimal primal;
};

inline KmdState init_kmd_state(Eigen::Index n) { return {{}, {}, KmdPrimal::uniform(n)}; }
inline LinearKmdState init_linear_kmd_state(Eigen::Index n) { return {Matrix::Zero(n, n), KmdPrimal::uniform(n)}; }

/// sum_i beta^(i) k(c, c^(i)) without clipping.
inline Vector f_eval_raw(const KmdState& s, const Kernel& k, const Vector& c) {
  Vector out = Vector::Zero(c.size());
  for (std::size_t i = 0; i < s.samples.size(); ++i) out += k(c, s.samples[i]) * s.betas[i];
  return out;
}

inline Vector f_eval(const KmdState& s, const Kernel& k, const Vector& c, double clip_bound) {
  return f_eval_raw(s, k, c).cwiseMax(-clip_bound).cwiseMin(clip_bound);
}

namespace detail {

inline std::string dump_primal(const KmdPrimal& p, const Vector& f) {
  std::ostringstream os;
  os.precision(17);
  os << "k=" << p.k << " eta=" << p.last_eta << "\nlog_r=" << p.log_r.transpose() << "\nf=" << f.transpose();
  return os.str();
}

/// Given f = f_mu(c) (already clipped), computes beta^(k), then updates r and
/// its average. Returns beta^(k).
inline Vector kmd_update(KmdPrimal& p, const Vector& f, const Vector& c, const CostMatrix& C, const KmdConstants& kc,
                         double eta, StepMode mode) {
  const auto n = static_cast<Eigen::Index>(C.size());
  Vector g;
  std::vector<Eigen::Index> J;
  lambda_star_with_argmax(f, C, g, J);
  g = -g;

  Vector beta = -c;
  for (Eigen::Index i = 0; i < n; ++i) beta[J[static_cast<std::size_t>(i)]] += p.r[i];
  beta *= eta * kc.beta_scale;

  p.log_r -= (eta * kc.alpha) * g;
  recentre_log(p.log_r);
  weights_from_log(p.log_r, p.r);

  const long k = p.k + 1;
  if (mode == StepMode::constant) {
    p.r_avg = (1.0 / static_cast<double>(k)) * p.r + (static_cast<double>(k - 1) / static_cast<double>(k)) * p.r_avg;
  } else {
    const double total = p.weight_sum + eta;
    p.r_avg = (p.weight_sum / total) * p.r_avg + (eta / total) * p.r;
    p.weight_sum = total;
  }
  p.k = k;
  p.last_eta = eta;
  if (!p.log_r.allFinite() || !beta.allFinite())
    throw NumericalError("kmd: non-finite iterate at step " + std::to_string(k), dump_primal(p, f));
  return beta;
}

}  // namespace detail

/// One Kernel Mirror Descent step on sample c.
inline void kmd_step(KmdState& s, const Kernel& k, const Vector& c, const CostMatrix& C, const KmdOptions& opt) {
  if (opt.history_cap && s.samples.size() >= *opt.history_cap)
    throw PreconditionError("kmd_step: history cap of " + std::to_string(*opt.history_cap) + " samples reached");
  if (static_cast<std::size_t>(c.size()) != C.size()) throw PreconditionError("kmd_step: sample dimension mismatch");
  const KmdConstants kc = kmd_constants(k, C, opt);
  const double eta = kmd_eta(kc, opt, s.primal.k + 1);
  const Vector f = f_eval(s, k, c, kc.clip_bound);
  Vector beta = detail::kmd_update(s.primal, f, c, C, kc, eta, opt.mode);
  s.betas.push_back(std::move(beta));
  s.samples.push_back(c);
}

/// The same step for the linear kernel in matrix form: f_mu(c) = Theta c and
/// appending beta^(k) becomes Theta += beta^(k) c^T.
inline void linear_kmd_step(LinearKmdState& s, const Vector& c, const CostMatrix& C, const KmdOptions& opt) {
  if (static_cast<std::size_t>(c.size()) != C.size())
    throw PreconditionError("linear_kmd_step: sample dimension mismatch");
  const KmdConstants kc = kmd_constants(Kernel::linear(), C, opt);
  const double eta = kmd_eta(kc, opt, s.primal.k + 1);
  const Vector f = (s.theta * c).cwiseMax(-kc.clip_bound).cwiseMin(kc.clip_bound);
  const Vector beta = detail::kmd_update(s.primal, f, c, C, kc, eta, opt.mode);
  s.theta.noalias() += beta * c.transpose();
}

struct KmdRunResult {
  Vector r_avg;
  Trace trace;
};

namespace detail {

template <class Step, class History>
KmdRunResult run_stream(MeasureStream& stream, long N, long trace_every, Step&& step, const KmdPrimal& primal,
                        History&& history) {
  if (N < 1) throw PreconditionError("kmd: N must be >= 1");
  KmdRunResult out;
  Stopwatch clock;
  for (long k = 1; k <= N; ++k) {
    auto d = stream.sample();
    if (!d) break;  // strict corpus exhausted
    step(d->measure.weights());
    if ((trace_every > 0 && k % trace_every == 0) || k == N)
      out.trace.push_back({primal.k, primal.last_eta, std::nullopt, clock.elapsed_ns(), history()});
  }
  out.r_avg = primal.r_avg;
  return out;
}

}  // namespace detail

/// N steps with the constant stepsize for horizon N.
inline KmdRunResult kmd_run(MeasureStream& stream, const Kernel& k, const CostMatrix& C, long N, KmdOptions opt = {},
                            long trace_every = 0) {
  opt.mode = StepMode::constant;
  opt.horizon = N;
  KmdState s = init_kmd_state(static_cast<Eigen::Index>(C.size()));
  return detail::run_stream(
      stream, N, trace_every, [&](const Vector& c) { kmd_step(s, k, c, C, opt); }, s.primal,
      [&] { return std::optional<std::size_t>(s.history_size()); });
}

/// Dynamic stepsize sqrt(3)/(L sqrt(t)) with the stepsize-weighted average;
/// needs no horizon, N only bounds the loop.
inline KmdRunResult kmd_run_online(MeasureStream& stream, const Kernel& k, const CostMatrix& C, long N,
                                   KmdOptions opt = {}, long trace_every = 0) {
  opt.mode = StepMode::dynamic;
  KmdState s = init_kmd_state(static_cast<Eigen::Index>(C.size()));
  return detail::run_stream(
      stream, N, trace_every, [&](const Vector& c) { kmd_step(s, k, c, C, opt); }, s.primal,
      [&] { return std::optional<std::size_t>(s.history_size()); });
}

inline KmdRunResult linear_kmd_run(MeasureStream& stream, const CostMatrix& C, long N, KmdOptions opt = {},
                                   long trace_every = 0) {
  if (opt.mode == StepMode::constant) opt.horizon = N;
  LinearKmdState s = init_linear_kmd_state(static_cast<Eigen::Index>(C.size()));
  return detail::run_stream(
      stream, N, trace_every, [&](const Vector& c) { linear_kmd_step(s, c, C, opt); }, s.primal,
      [] { return std::optional<std::size_t>(); });
}

}  // namespace bary
