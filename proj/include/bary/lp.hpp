#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bary/errors.hpp"

namespace bary {

/// Dense primal simplex for   max c'x  s.t.  A x <= b,  x >= 0,  with b >= 0
/// (the origin is feasible, so no phase one is needed).
///
/// The tableau is kept in dictionary form (basic rows, nonbasic columns),
/// so slack columns are never stored. Entering uses Dantzig's rule and
/// switches to Bland's rule after a run of degenerate pivots.
struct LpResult {
  enum class Status { optimal, unbounded, iteration_limit };
  Status status = Status::iteration_limit;
  double value = 0.0;
  Eigen::VectorXd x;     // primal solution
  Eigen::VectorXd dual;  // row multipliers y >= 0 with A'y >= c and b'y = value
  long pivots = 0;
};

class DenseSimplex {
 public:
  DenseSimplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c)
      : m_(A.rows()), n_(A.cols()), T_(A.rows() + 1, A.cols() + 1), basis_(A.rows()), nonbasis_(A.cols()) {
    if (b.size() != m_ || c.size() != n_) throw PreconditionError("DenseSimplex: dimension mismatch");
    if ((b.array() < 0.0).any()) throw PreconditionError("DenseSimplex: right-hand side must be non-negative");
    // Row i: x_B[i] = T(i, n) - sum_j T(i, j) x_N[j];  objective row m: z = T(m, n) + sum_j T(m, j) x_N[j].
    T_.topLeftCorner(m_, n_) = A;
    T_.topRightCorner(m_, 1) = b;
    T_.bottomLeftCorner(1, n_) = c.transpose();
    T_(m_, n_) = 0.0;
    for (Eigen::Index j = 0; j < n_; ++j) nonbasis_[j] = j;
    for (Eigen::Index i = 0; i < m_; ++i) basis_[i] = n_ + i;
  }

  LpResult solve(long max_pivots = 200000, double eps = 1e-11) {
    LpResult res;
    long degenerate_run = 0;
    const long bland_after = 50;
    for (;;) {
      if (res.pivots >= max_pivots) {
        res.status = LpResult::Status::iteration_limit;
        return finish(res);
      }
      const bool bland = degenerate_run > bland_after;
      // Entering column.
      Eigen::Index enter = -1;
      double best = eps;
      for (Eigen::Index j = 0; j < n_; ++j) {
        const double d = T_(m_, j);
        if (d <= eps) continue;
        if (bland) {
          if (enter < 0 || nonbasis_[j] < nonbasis_[enter]) enter = j;
        } else if (d > best) {
          best = d;
          enter = j;
        }
      }
      if (enter < 0) {
        res.status = LpResult::Status::optimal;
        return finish(res);
      }
      // Ratio test; ties go to the lowest variable index.
      Eigen::Index leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double a = T_(i, enter);
        if (a <= eps) continue;
        const double r = std::max(T_(i, n_), 0.0) / a;
        if (leave < 0 || r < ratio - 1e-14) {
          ratio = r;
          leave = i;
        } else if (r <= ratio + 1e-14 && basis_[i] < basis_[leave]) {
          leave = i;
        }
      }
      if (leave < 0) {
        res.status = LpResult::Status::unbounded;
        return finish(res);
      }
      degenerate_run = (ratio <= 1e-14) ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      ++res.pivots;
    }
  }

 private:
  void pivot(Eigen::Index r, Eigen::Index s) {
    const double inv = 1.0 / T_(r, s);
    // Row r now expresses the entering variable.
    for (Eigen::Index j = 0; j <= n_; ++j)
      if (j != s) T_(r, j) *= inv;
    T_(r, s) = inv;
    for (Eigen::Index i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = T_(i, s);
      if (f == 0.0) continue;
      const double sign = (i == m_) ? 1.0 : -1.0;
      // Basic rows carry a minus sign on nonbasic terms; the objective row a plus.
      for (Eigen::Index j = 0; j <= n_; ++j) {
        if (j == s) continue;
        if (j == n_)
          T_(i, j) += sign * f * T_(r, j);
        else
          T_(i, j) -= f * T_(r, j);
      }
      T_(i, s) = -f * inv;
    }
    std::swap(basis_[r], nonbasis_[s]);
  }

  LpResult& finish(LpResult& res) {
    res.x = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i)
      if (basis_[i] < n_) res.x[basis_[i]] = T_(i, n_);
    res.dual = Eigen::VectorXd::Zero(m_);
    for (Eigen::Index j = 0; j < n_; ++j)
      if (nonbasis_[j] >= n_) res.dual[nonbasis_[j] - n_] = -T_(m_, j);
    res.value = T_(m_, n_);
    return res;
  }

  Eigen::Index m_, n_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> T_;
  std::vector<Eigen::Index> basis_;
  std::vector<Eigen::Index> nonbasis_;
};

inline LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  return DenseSimplex(A, b, c).solve();
}

}  // namespace bary
