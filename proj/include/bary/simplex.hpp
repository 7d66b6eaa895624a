#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bary/measures.hpp"

namespace bary::detail {

/// r = exp(log_r - max) / sum. Subtracting the max keeps every exponent
/// <= 0, so the largest weight is exactly representable.
inline void weights_from_log(const Vector& log_r, Vector& r) {
  const double top = log_r.maxCoeff();
  r = (log_r.array() - top).exp().matrix();
  r /= r.sum();
}

/// Re-centres log weights on their max. Keeps them bounded over long runs
/// without changing the normalized weights.
inline void recentre_log(Vector& log_r) { log_r.array() -= log_r.maxCoeff(); }

/// Euclidean projection onto the probability simplex (sort-based).
inline Vector project_simplex(const Vector& y) {
  std::vector<double> u(y.data(), y.data() + y.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    css += u[k];
    const double t = (css - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  Vector x = (y.array() - theta).max(0.0).matrix();
  const double s = x.sum();
  return x / s;
}

inline bool on_simplex(const Vector& r, double tol = kSimplexTol) {
  return r.allFinite() && (r.array() >= 0.0).all() && std::abs(r.sum() - 1.0) <= tol;
}

}  // namespace bary::detail
