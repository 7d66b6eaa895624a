#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "bary/dual_bound.hpp"
#include "bary/rng.hpp"

namespace bary {

struct CertifyInstance {
  Vector r, c;
  Matrix C;
};

/// Even instances use squared distances between random points of [0, 1];
/// odd ones an i.i.d. uniform non-negative matrix. Marginals are
/// floor-clamped exponential draws.
inline std::vector<CertifyInstance> random_certify_instances(long n_min, long n_max, long count, std::uint64_t seed) {
  if (n_min < 2 || n_max < n_min) throw PreconditionError("certify: need 2 <= n_min <= n_max");
  if (count < 0) throw PreconditionError("certify: instance count must be >= 0");
  Rng rng(seed);
  std::vector<CertifyInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  const auto draw_marginal = [&rng](Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.exponential(1.0);
    return floor_clamped(v / v.sum());
  };
  for (long i = 0; i < count; ++i) {
    const auto n = static_cast<Eigen::Index>(n_min + static_cast<long>(rng.index(static_cast<std::size_t>(n_max - n_min + 1))));
    CertifyInstance inst;
    inst.C.resize(n, n);
    if (i % 2 == 0) {
      Vector x(n);
      for (Eigen::Index a = 0; a < n; ++a) x[a] = rng.uniform();
      for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) inst.C(a, b) = (x[a] - x[b]) * (x[a] - x[b]);
    } else {
      for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) inst.C(a, b) = rng.uniform();
    }
    inst.r = draw_marginal(n);
    inst.c = draw_marginal(n);
    out.push_back(std::move(inst));
  }
  return out;
}

/// FNV-1a over the raw bytes of every instance; equal digests mean equal instance sets.
inline std::string instance_digest(const std::vector<CertifyInstance>& xs) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&h](const double* p, Eigen::Index len) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t k = 0; k < static_cast<std::size_t>(len) * sizeof(double); ++k) {
      h ^= bytes[k];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& x : xs) {
    feed(x.r.data(), x.r.size());
    feed(x.c.data(), x.c.size());
    feed(x.C.data(), x.C.size());
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct CertifySummary {
  long instances = 0;
  long certified = 0;
  double max_abs_diff = 0.0;
  std::vector<long> failures;
  std::string digest;

  bool passed() const { return failures.empty(); }
};

inline CertifySummary certify_random(long n_min, long n_max, long count, std::uint64_t seed, double tol = 1e-7,
                                     const ExactOtOptions& opt = {}) {
  if (n_max > static_cast<long>(opt.max_n)) throw PreconditionError("certify: n_max exceeds the exact-solver cap");
  const auto xs = random_certify_instances(n_min, n_max, count, seed);
  CertifySummary s;
  s.instances = count;
  s.digest = instance_digest(xs);
  for (long i = 0; i < count; ++i) {
    const auto& x = xs[static_cast<std::size_t>(i)];
    const auto cert = certify_dual_bound(x.r, x.c, CostMatrix(x.C), tol, opt);
    s.max_abs_diff = std::max(s.max_abs_diff, std::abs(cert.box_value - cert.exact_value));
    if (cert.certified) ++s.certified;
    else s.failures.push_back(i);
  }
  return s;
}

}  // namespace bary
