#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "bary/cost.hpp"

namespace bary {

struct ExactOtOptions {
  std::size_t max_n = 64;
  double feasibility_tol = 1e-9;
  long max_pivots = 1000000;
};

/// Optimal plan with Kantorovich potentials. The duals follow the
/// convention  L_C(r, c) = max -<lambda, r> - <mu, c>  s.t.  -C_ij - lambda_i - mu_j <= 0.
struct OtSolution {
  double value = 0.0;
  Matrix plan;
  Vector dual_lambda;
  Vector dual_mu;
  double gap = 0.0;  // primal value minus dual value
  long pivots = 0;

  double dual_value(const Vector& r, const Vector& c) const { return -dual_lambda.dot(r) - dual_mu.dot(c); }
};

namespace detail {

/// Transportation simplex on a spanning-tree basis of 2n-1 cells.
class TransportSimplex {
 public:
  TransportSimplex(const Vector& r, const Vector& c, const Matrix& cost, const ExactOtOptions& opt)
      : r_(r), c_(c), cost_(cost), n_(r.size()), opt_(opt) {}

  OtSolution solve() {
    initial_basis();
    long degenerate_run = 0;
    long pivots = 0;
    const double scale = std::max(1.0, cost_.cwiseAbs().maxCoeff());
    const double eps = 1e-12 * scale;
    for (;;) {
      compute_potentials();
      const bool bland = degenerate_run > 2 * n_;
      Eigen::Index ei = -1, ej = -1;
      double best = -eps;
      for (Eigen::Index i = 0; i < n_ && !(bland && ei >= 0); ++i)
        for (Eigen::Index j = 0; j < n_; ++j) {
          if (in_basis_(i, j)) continue;
          const double d = cost_(i, j) - u_[i] - v_[j];
          if (d < best) {
            ei = i;
            ej = j;
            if (bland) break;
            best = d;
          }
        }
      if (ei < 0) break;
      if (++pivots > opt_.max_pivots) throw NumericalError("exact_ot: pivot limit reached");
      const double theta = pivot(ei, ej, bland);
      degenerate_run = (theta <= 1e-15) ? degenerate_run + 1 : 0;
    }
    recompute_flows();
    compute_potentials();

    OtSolution sol;
    sol.plan = Matrix::Zero(n_, n_);
    for (const auto& cell : basis_) sol.plan(cell.i, cell.j) = cell.flow;
    sol.value = (sol.plan.array() * cost_.array()).sum();
    sol.dual_lambda = -u_;
    sol.dual_mu = -v_;
    sol.gap = sol.value - sol.dual_value(r_, c_);
    sol.pivots = pivots;
    return sol;
  }

 private:
  struct Cell {
    Eigen::Index i, j;
    double flow;
  };

  // Node ids: rows 0..n-1, columns n..2n-1.
  void initial_basis() {
    basis_.clear();
    in_basis_ = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n_, n_, false);
    Vector a = r_, b = c_;
    Eigen::Index i = 0, j = 0;
    for (;;) {
      const double x = std::max(0.0, std::min(a[i], b[j]));
      add_cell(i, j, x);
      a[i] -= x;
      b[j] -= x;
      if (i == n_ - 1 && j == n_ - 1) break;
      if (i == n_ - 1)
        ++j;
      else if (j == n_ - 1)
        ++i;
      else if (a[i] <= b[j])
        ++i;
      else
        ++j;
    }
  }

  void add_cell(Eigen::Index i, Eigen::Index j, double flow) {
    basis_.push_back({i, j, flow});
    in_basis_(i, j) = true;
  }

  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(static_cast<std::size_t>(2 * n_));
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      adj[static_cast<std::size_t>(basis_[k].i)].push_back(k);
      adj[static_cast<std::size_t>(n_ + basis_[k].j)].push_back(k);
    }
    return adj;
  }

  void compute_potentials() {
    u_ = Vector::Zero(n_);
    v_ = Vector::Zero(n_);
    const auto adj = adjacency();
    std::vector<bool> seen(static_cast<std::size_t>(2 * n_), false);
    std::deque<std::size_t> queue{0};
    seen[0] = true;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t k : adj[node]) {
        const auto& cell = basis_[k];
        const auto row = static_cast<std::size_t>(cell.i), col = static_cast<std::size_t>(n_ + cell.j);
        const std::size_t other = (node == row) ? col : row;
        if (seen[other]) continue;
        seen[other] = true;
        if (other == col)
          v_[cell.j] = cost_(cell.i, cell.j) - u_[cell.i];
        else
          u_[cell.i] = cost_(cell.i, cell.j) - v_[cell.j];
        queue.push_back(other);
      }
    }
  }

  // Tree path from row node ei to column node ej; returns basis indices.
  std::vector<std::size_t> tree_path(Eigen::Index ei, Eigen::Index ej) const {
    const auto adj = adjacency();
    const std::size_t src = static_cast<std::size_t>(ei), dst = static_cast<std::size_t>(n_ + ej);
    std::vector<long> via(static_cast<std::size_t>(2 * n_), -1);
    std::vector<std::size_t> parent(static_cast<std::size_t>(2 * n_), 0);
    std::vector<bool> seen(static_cast<std::size_t>(2 * n_), false);
    std::deque<std::size_t> queue{src};
    seen[src] = true;
    while (!queue.empty() && !seen[dst]) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t k : adj[node]) {
        const auto row = static_cast<std::size_t>(basis_[k].i), col = static_cast<std::size_t>(n_ + basis_[k].j);
        const std::size_t other = (node == row) ? col : row;
        if (seen[other]) continue;
        seen[other] = true;
        via[other] = static_cast<long>(k);
        parent[other] = node;
        queue.push_back(other);
      }
    }
    std::vector<std::size_t> path;
    for (std::size_t node = dst; node != src; node = parent[node]) path.push_back(static_cast<std::size_t>(via[node]));
    std::reverse(path.begin(), path.end());  // starts at the cell touching row ei
    return path;
  }

  // Enters (ei, ej); returns the step length.
  double pivot(Eigen::Index ei, Eigen::Index ej, bool bland) {
    // Cycle: entering (+), then path cells alternate -, +, -, ... starting
    // from the cell incident to row ei.
    const auto path = tree_path(ei, ej);
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = basis_.size();
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const auto& cell = basis_[path[p]];
      const bool better = cell.flow < theta - 1e-15;
      const bool tie = !better && cell.flow <= theta + 1e-15;
      const auto key = [&](std::size_t k) { return basis_[k].i * n_ + basis_[k].j; };
      if (better || (tie && (bland ? key(path[p]) < key(leave) : false))) {
        theta = cell.flow;
        leave = path[p];
      }
    }
    theta = std::max(theta, 0.0);
    for (std::size_t p = 0; p < path.size(); ++p) basis_[path[p]].flow += (p % 2 == 0) ? -theta : theta;
    in_basis_(basis_[leave].i, basis_[leave].j) = false;
    basis_[leave] = {ei, ej, theta};
    in_basis_(ei, ej) = true;
    return theta;
  }

  // Flows are determined by the tree; re-derive them from the marginals by
  // peeling leaves, which removes drift accumulated over pivots.
  void recompute_flows() {
    const auto adj = adjacency();
    Vector supply(2 * n_);
    supply << r_, c_;
    std::vector<std::size_t> degree(static_cast<std::size_t>(2 * n_));
    for (std::size_t v = 0; v < adj.size(); ++v) degree[v] = adj[v].size();
    std::vector<bool> done(basis_.size(), false);
    std::deque<std::size_t> leaves;
    for (std::size_t v = 0; v < adj.size(); ++v)
      if (degree[v] == 1) leaves.push_back(v);
    while (!leaves.empty()) {
      const std::size_t node = leaves.front();
      leaves.pop_front();
      if (degree[node] != 1) continue;
      std::size_t k = 0;
      for (std::size_t cand : adj[node])
        if (!done[cand]) k = cand;
      auto& cell = basis_[k];
      const auto row = static_cast<std::size_t>(cell.i), col = static_cast<std::size_t>(n_ + cell.j);
      const std::size_t other = (node == row) ? col : row;
      cell.flow = std::max(0.0, supply[static_cast<Eigen::Index>(node)]);
      supply[static_cast<Eigen::Index>(other)] -= cell.flow;
      done[k] = true;
      degree[node] = 0;
      if (--degree[other] == 1) leaves.push_back(other);
    }
  }

  const Vector& r_;
  const Vector& c_;
  const Matrix& cost_;
  Eigen::Index n_;
  ExactOtOptions opt_;
  std::vector<Cell> basis_;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> in_basis_;
  Vector u_, v_;
};

}  // namespace detail

/// Exact optimal transport by the transportation simplex. Intended for
/// evaluation and certification at small n.
inline OtSolution exact_ot(const Vector& r, const Vector& c, const CostMatrix& C, const ExactOtOptions& opt = {}) {
  const auto n = static_cast<Eigen::Index>(C.size());
  if (r.size() != n || c.size() != n) throw PreconditionError("exact_ot: marginals do not match cost size");
  if (C.size() > opt.max_n)
    throw PreconditionError("exact_ot: n = " + std::to_string(C.size()) + " exceeds exact-solver cap " +
                            std::to_string(opt.max_n) + "; use sinkhorn for large problems");
  if ((r.array() < 0.0).any() || (c.array() < 0.0).any()) throw PreconditionError("exact_ot: negative mass");
  if (std::abs(r.sum() - c.sum()) > opt.feasibility_tol) throw PreconditionError("exact_ot: marginal totals differ");
  return detail::TransportSimplex(r, c, C.entries(), opt).solve();
}

inline OtSolution exact_ot(const DiscreteMeasure& r, const DiscreteMeasure& c, const CostMatrix& C,
                           const ExactOtOptions& opt = {}) {
  if (r.support() && c.support() && !(*r.support() == *c.support()))
    throw PreconditionError("exact_ot: measures live on different supports");
  return exact_ot(r.weights(), c.weights(), C, opt);
}

/// p-Wasserstein distance on a sorted 1-D grid via the monotone quantile
/// coupling of the two step CDFs.
inline double wasserstein_1d(const Vector& r, const Vector& c, const Grid1D& grid, double p = 2.0) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (r.size() != n || c.size() != n) throw PreconditionError("wasserstein_1d: size mismatch with grid");
  if (!(p >= 1.0)) throw PreconditionError("wasserstein_1d: p must be >= 1");
  Vector fr(n), fc(n);
  double ar = 0.0, ac = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    fr[i] = (ar += r[i]);
    fc[i] = (ac += c[i]);
  }
  fr /= ar;
  fc /= ac;
  fr[n - 1] = 1.0;
  fc[n - 1] = 1.0;
  double acc = 0.0, q = 0.0;
  Eigen::Index i = 0, j = 0;
  while (i < n && j < n) {
    const double next = std::min(fr[i], fc[j]);
    const double d = std::abs(grid[static_cast<std::size_t>(i)] - grid[static_cast<std::size_t>(j)]);
    if (next > q) acc += (next - q) * ((p == 2.0) ? d * d : std::pow(d, p));
    q = std::max(q, next);
    const bool adv_i = fr[i] <= next, adv_j = fc[j] <= next;
    if (adv_i) ++i;
    if (adv_j) ++j;
  }
  return std::pow(acc, 1.0 / p);
}

inline double wasserstein_1d(const DiscreteMeasure& r, const DiscreteMeasure& c, const Grid1D& grid, double p = 2.0) {
  return wasserstein_1d(r.weights(), c.weights(), grid, p);
}

}  // namespace bary
