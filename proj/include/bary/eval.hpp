#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bary/dual_bound.hpp"
#include "bary/trace.hpp"

namespace bary {

/// 1-D W2 barycenter of the Gaussian law: N(E[mu], E[sigma]^2) with
/// E[sigma] = 1 / rate, discretized on the data grid.
inline DiscreteMeasure true_gaussian_barycenter(const GaussianParamLaw& law, const std::shared_ptr<const Grid1D>& grid) {
  law.validate();
  return discretize_gaussian(law.mean_mu, 1.0 / law.sd_rate, grid);
}

/// W2 distance on the shared grid.
inline double score(const Vector& estimate, const Vector& truth, const Grid1D& grid) {
  return wasserstein_1d(estimate, truth, grid, 2.0);
}

/// Empirical surrogate for the duality gap at r over a holdout sample with
/// uniform weights. Each dual row is the box-constrained maximizer at r, so
/// the value is sum_t W(r, c_t)/m minus the minimum over the simplex of the
/// supporting linear function built from those duals.
inline double gap_surrogate(const Vector& r, const std::vector<Vector>& holdout, const CostMatrix& C,
                            const ExactOtOptions& opt = {}) {
  if (holdout.empty()) throw PreconditionError("gap_surrogate: empty holdout");
  if (C.size() > opt.max_n)
    throw PreconditionError("gap_surrogate: n exceeds exact-solver cap " + std::to_string(opt.max_n));
  const double w = 1.0 / static_cast<double>(holdout.size());
  const auto n = static_cast<Eigen::Index>(C.size());
  double upper = 0.0, linear = 0.0;
  Vector neg_lambda = Vector::Zero(n);
  for (const auto& c : holdout) {
    const BoxDualSolution b = box_dual(r, c, C, C.inf_norm(), opt);
    upper += w * b.value;
    neg_lambda -= w * b.lambda;
    linear += w * b.mu.dot(c);
  }
  return upper - (neg_lambda.minCoeff() - linear);
}

/// Holdout draws from the Gaussian law on their own stream.
inline std::vector<Vector> make_holdout(const GaussianParamLaw& law, const std::shared_ptr<const Grid1D>& grid,
                                        std::size_t size, std::uint64_t seed) {
  MeasureStream stream(GaussianSource{law, grid}, seed);
  std::vector<Vector> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) out.push_back(stream.sample()->measure.weights());
  return out;
}

struct ReportRow {
  long samples_processed = 0;
  std::optional<double> w2_to_truth;
  std::optional<double> gap_surrogate;
  std::int64_t wall_ns = 0;
};

struct ExperimentReport {
  std::string method;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<ReportRow> rows;

  void write_csv(std::ostream& out) const {
    out << "# method: " << method << "\n# seed: " << seed << "\n# config_hash: " << config_hash << '\n';
    out << "samples_processed,W2_to_truth,gap_surrogate,wall_ns\n";
    for (const auto& row : rows) {
      out << row.samples_processed << ',';
      if (row.w2_to_truth) out << detail::format_double(*row.w2_to_truth);
      out << ',';
      if (row.gap_surrogate) out << detail::format_double(*row.gap_surrogate);
      out << ',' << row.wall_ns << '\n';
    }
  }
};

}  // namespace bary
