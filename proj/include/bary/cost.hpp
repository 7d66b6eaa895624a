#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bary/measures.hpp"

namespace bary {

/// Non-negative square cost matrix with its cached sup-norm.
class CostMatrix {
 public:
  explicit CostMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols() || entries_.rows() == 0)
      throw PreconditionError("CostMatrix: must be square and non-empty");
    if (!entries_.allFinite() || (entries_.array() < 0.0).any())
      throw PreconditionError("CostMatrix: entries must be finite and non-negative");
    inf_norm_ = entries_.maxCoeff();
  }

  std::size_t size() const { return static_cast<std::size_t>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  double inf_norm() const { return inf_norm_; }

  /// Same matrix divided by its sup-norm (no-op for the zero matrix).
  CostMatrix normalized() const {
    if (inf_norm_ == 0.0) return *this;
    return CostMatrix(entries_ / inf_norm_);
  }

 private:
  Matrix entries_;
  double inf_norm_ = 0.0;
};

/// D^p with D the absolute distance between grid points.
inline CostMatrix squared_distance_cost(const Grid1D& grid, double p = 2.0) {
  if (!(p >= 1.0)) throw PreconditionError("squared_distance_cost: p must be >= 1");
  const auto n = static_cast<Eigen::Index>(grid.size());
  Matrix c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = std::abs(grid[static_cast<std::size_t>(i)] - grid[static_cast<std::size_t>(j)]);
      c(i, j) = (p == 2.0) ? d * d : std::pow(d, p);
    }
  return CostMatrix(std::move(c));
}

inline void write_cost_csv(std::ostream& out, const CostMatrix& c) {
  for (Eigen::Index i = 0; i < c.entries().rows(); ++i) {
    for (Eigen::Index j = 0; j < c.entries().cols(); ++j) {
      if (j) out << ',';
      out << detail::format_double(c(i, j));
    }
    out << '\n';
  }
}

inline CostMatrix load_cost_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("load_cost_csv: cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    rows.push_back(detail::parse_csv_numbers(line, path.string()));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != n)
      throw PreconditionError("load_cost_csv: " + path.string() + " is not square");
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = rows[i][j];
  }
  return CostMatrix(std::move(c));
}

/// lambda*_i(mu) = max_j (-C_ij - mu_j).
inline Vector lambda_star(const Vector& mu, const CostMatrix& C) {
  const auto n = static_cast<Eigen::Index>(C.size());
  if (mu.size() != n) throw PreconditionError("lambda_star: dimension mismatch");
  const Matrix& c = C.entries();
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = -c(i, 0) - mu[0];
    for (Eigen::Index j = 1; j < n; ++j) best = std::max(best, -c(i, j) - mu[j]);
    out[i] = best;
  }
  return out;
}

/// Smallest j attaining max_j (-C_{row,j} - mu_j).
inline Eigen::Index lambda_star_argmax(const Vector& mu, const CostMatrix& C, Eigen::Index row) {
  const Matrix& c = C.entries();
  Eigen::Index arg = 0;
  double best = -c(row, 0) - mu[0];
  for (Eigen::Index j = 1; j < mu.size(); ++j) {
    const double v = -c(row, j) - mu[j];
    if (v > best) {
      best = v;
      arg = j;
    }
  }
  return arg;
}

/// Row maxima and their lowest-index argmax in one pass.
inline void lambda_star_with_argmax(const Vector& mu, const CostMatrix& C, Vector& value,
                                    std::vector<Eigen::Index>& arg) {
  const auto n = static_cast<Eigen::Index>(C.size());
  value.resize(n);
  arg.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = lambda_star_argmax(mu, C, i);
    arg[static_cast<std::size_t>(i)] = j;
    value[i] = -C(i, j) - mu[j];
  }
}

}  // namespace bary
