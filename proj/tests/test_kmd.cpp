#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bary/kmd.hpp"
#include "bary/transport.hpp"

using namespace bary;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

CostMatrix swap2() { return CostMatrix((Matrix(2, 2) << 0, 1, 1, 0).finished()); }

Vector random_simplex(Rng& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.exponential(1.0);
  return floor_clamped(v / v.sum());
}

MeasureStream random_stream(Eigen::Index n, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  FiniteSource src;
  for (std::size_t t = 0; t < m; ++t) src.measures.push_back(random_simplex(rng, n));
  src.weights = Vector::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
  return MeasureStream(src, seed + 1);
}

}  // namespace

TEST(Kernel, DiagonalValues) {
  Rng rng(1);
  const Vector x = random_simplex(rng, 6);
  EXPECT_EQ(Kernel::rbf()(x, x), 1.0);
  EXPECT_NEAR(Kernel::diffusion()(x, x), 1.0, 1e-15);
  EXPECT_NEAR(Kernel::linear()(x, x), x.squaredNorm(), 0);
  EXPECT_LE(Kernel::linear()(x, x), 1.0);
}

TEST(Kernel, RbfAtUnitDistance) {
  const double a = 1 / std::sqrt(2.0);
  const Vector x = vec({1, 0}), y = vec({1 - a, a});
  EXPECT_NEAR((x - y).squaredNorm(), 1.0, 1e-15);
  EXPECT_NEAR(kernel_eval(Kernel::rbf(1e-3), x, y), std::exp(-1e-3), 1e-15);
  EXPECT_NEAR(kernel_eval(Kernel::rbf(1e-3), x, y), 0.9990, 1e-4);
}

TEST(Kernel, DiffusionOrthogonalVertices) {
  const double t = 7.0;
  EXPECT_NEAR(Kernel::diffusion(t)(vec({1, 0, 0}), vec({0, 1, 0})), std::exp(-std::numbers::pi * std::numbers::pi / (4 * t)),
              1e-15);
}

TEST(Kernel, DiffusionSurvivesInnerProductOvershoot) {
  // Rounding can push <sqrt x, sqrt x> above 1; the clamp keeps acos defined.
  Vector x = Vector::Constant(7, 1.0 / 7);
  EXPECT_TRUE(std::isfinite(Kernel::diffusion(1e3)(x, x)));
}

TEST(Kernel, GramMatricesArePsd) {
  Rng rng(2);
  std::vector<Vector> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(random_simplex(rng, 8));
  for (const Kernel& k : {Kernel::rbf(), Kernel::rbf(1.0), Kernel::diffusion(1.0), Kernel::linear()}) {
    Matrix G(20, 20);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) G(i, j) = k(pts[i], pts[j]);
    EXPECT_LE((G - G.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Matrix> es(G);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8) << to_string(k.family) << " " << k.param;
  }
}

// exp(-d^2 / t) with d the geodesic distance on the sphere is not positive
// definite in general. At t = 1e3 the Gram matrix of generic points has a
// small negative eigenvalue; nothing in the algorithms relies on PSD-ness.
TEST(Kernel, DiffusionIsIndefiniteAtLargeT) {
  Rng rng(2);
  std::vector<Vector> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(random_simplex(rng, 8));
  const Kernel k = Kernel::diffusion(1e3);
  Matrix G(20, 20);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) G(i, j) = k(pts[i], pts[j]);
  const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(G).eigenvalues().minCoeff();
  EXPECT_LT(lo, -1e-6);
  EXPECT_GT(lo, -1e-4);
}

TEST(Kernel, RejectsBadParameters) {
  EXPECT_THROW(Kernel::rbf(0), PreconditionError);
  EXPECT_THROW(Kernel::diffusion(-1), PreconditionError);
  EXPECT_THROW(Kernel::rbf(1, 0), PreconditionError);
}

TEST(Kernel, LinearRadiusFromCost) {
  const auto C = squared_distance_cost(Grid1D::uniform(0, 2, 5));
  EXPECT_DOUBLE_EQ(effective_r_sq(Kernel::linear(), C), 2 * 25 * 16);
  EXPECT_EQ(effective_r_sq(Kernel::rbf(1e-3, 25), C), 25);
}

TEST(FEval, EmptyHistoryIsZero) {
  const auto s = init_kmd_state(3);
  EXPECT_EQ(f_eval(s, Kernel::rbf(), vec({0.2, 0.3, 0.5}), 1.0), Vector::Zero(3));
}

TEST(FEval, SingleStoredTermWithRbf) {
  auto s = init_kmd_state(3);
  const Vector c = vec({0.2, 0.3, 0.5});
  s.betas.push_back(vec({0.5, -3.0, 2.0}));
  s.samples.push_back(c);
  EXPECT_EQ(f_eval(s, Kernel::rbf(), c, 1.0), vec({0.5, -1.0, 1.0}));
}

TEST(KmdStep, FirstStepFromColdStart) {
  auto s = init_kmd_state(2);
  const Vector c = vec({0.9, 0.1});
  KmdOptions opt;
  opt.horizon = 10;
  kmd_step(s, Kernel::rbf(), c, swap2(), opt);
  EXPECT_EQ(s.primal.r, vec({0.5, 0.5}));  // g = min_j C_ij = 0
  const double n = 2, R2 = 25;
  const double eta = 2 / (std::sqrt(8 * std::log(n) + 8 * n * n * R2) * std::sqrt(50.0));
  const Vector expect = eta * 2 * n * R2 * (-c + Vector::Constant(2, 0.5));
  EXPECT_NEAR((s.betas[0] - expect).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(KmdStep, TwoStepHandTrace) {
  const CostMatrix C = swap2();
  const Vector c1 = vec({0.9, 0.1}), c2 = vec({0.2, 0.8});
  KmdOptions opt;
  opt.horizon = 2;
  opt.eta_scale = 50;  // large enough that the second step moves r
  const Kernel k = Kernel::rbf(0.5);
  auto s = init_kmd_state(2);
  kmd_step(s, k, c1, C, opt);
  kmd_step(s, k, c2, C, opt);

  const double n = 2, R2 = 25, alpha = 2 * std::log(2.0), bs = 2 * n * R2;
  const double eta = 50 * 2 / (std::sqrt(8 * std::log(n) + 8 * n * n * R2) * std::sqrt(10.0));
  // Step 1: f = 0, J = (0, 1), g = 0, r stays uniform.
  const double b1[2] = {eta * bs * (-0.9 + 0.5), eta * bs * (-0.1 + 0.5)};
  // Step 2: f = clip(b1 * k(c2, c1)).
  const double kv = std::exp(-0.5 * ((0.9 - 0.2) * (0.9 - 0.2) + (0.1 - 0.8) * (0.1 - 0.8)));
  const double f[2] = {std::clamp(b1[0] * kv, -1.0, 1.0), std::clamp(b1[1] * kv, -1.0, 1.0)};
  double g[2];
  int J[2];
  for (int i = 0; i < 2; ++i) {
    const double v0 = -C(i, 0) - f[0], v1 = -C(i, 1) - f[1];
    J[i] = v1 > v0 ? 1 : 0;
    g[i] = -std::max(v0, v1);
  }
  double b2[2] = {-0.2, -0.8};
  for (int i = 0; i < 2; ++i) b2[J[i]] += 0.5;
  double r[2] = {0.5 * std::exp(-eta * alpha * g[0]), 0.5 * std::exp(-eta * alpha * g[1])};
  const double z = r[0] + r[1];
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(s.betas[0][i], b1[i], 1e-13);
    EXPECT_NEAR(s.betas[1][i], eta * bs * b2[i], 1e-13);
    EXPECT_NEAR(s.primal.r[i], r[i] / z, 1e-15);
    EXPECT_NEAR(s.primal.r_avg[i], 0.5 * (0.5 + r[i] / z), 1e-15);
  }
  EXPECT_NE(s.primal.r[0], 0.5);
}

TEST(KmdStep, BetaRecursionMatchesFullHistory) {
  auto stream = random_stream(6, 15, 3);
  const auto C = squared_distance_cost(Grid1D::uniform(0, 1, 6));
  KmdOptions opt;
  opt.horizon = 200;
  opt.eta_scale = 30;
  const Kernel k = Kernel::diffusion(0.5);
  auto s = init_kmd_state(6);
  Rng probe_rng(4);
  std::vector<Vector> probes;
  for (int i = 0; i < 5; ++i) probes.push_back(random_simplex(probe_rng, 6));
  std::vector<Vector> incremental(probes.size(), Vector::Zero(6));
  for (int step = 0; step < 200; ++step) {
    kmd_step(s, k, stream.sample()->measure.weights(), C, opt);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      incremental[p] += s.betas.back() * k(probes[p], s.samples.back());
      ASSERT_LE((incremental[p] - f_eval_raw(s, k, probes[p])).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(KmdStep, NormBoundsAndSimplexAlongRun) {
  auto stream = random_stream(8, 30, 4);
  const auto C = squared_distance_cost(Grid1D::uniform(0, 1, 8));
  for (StepMode mode : {StepMode::constant, StepMode::dynamic}) {
    KmdOptions opt;
    opt.mode = mode;
    opt.horizon = 300;
    opt.eta_scale = 100;
    const auto kc = kmd_constants(Kernel::rbf(), C, opt);
    auto s = init_kmd_state(8);
    for (int step = 1; step <= 300; ++step) {
      const Vector c = stream.sample()->measure.weights();
      const Vector f = f_eval(s, Kernel::rbf(), c, kc.clip_bound);
      ASSERT_LE(f.cwiseAbs().maxCoeff(), C.inf_norm());
      ASSERT_LE(lambda_star(f, C).cwiseAbs().maxCoeff(), 2 * C.inf_norm());
      kmd_step(s, Kernel::rbf(), c, C, opt);
      const double eta = kmd_eta(kc, opt, step);
      ASSERT_LE(s.betas.back().cwiseAbs().maxCoeff() / (eta * kc.beta_scale), 2.0);
      ASSERT_TRUE(detail::on_simplex(s.primal.r));
      ASSERT_TRUE(detail::on_simplex(s.primal.r_avg));
    }
    EXPECT_EQ(s.betas.size(), 300u);
    EXPECT_EQ(s.samples.size(), 300u);
  }
}

TEST(KmdStep, HistoryCapRejects) {
  KmdOptions opt;
  opt.horizon = 10;
  opt.history_cap = 2;
  auto s = init_kmd_state(2);
  kmd_step(s, Kernel::rbf(), vec({0.5, 0.5}), swap2(), opt);
  kmd_step(s, Kernel::rbf(), vec({0.5, 0.5}), swap2(), opt);
  EXPECT_THROW(kmd_step(s, Kernel::rbf(), vec({0.5, 0.5}), swap2(), opt), PreconditionError);
}

TEST(LinearKmd, MatrixFormMatchesBetaHistory) {
  auto stream = random_stream(7, 20, 5);
  const auto C = squared_distance_cost(Grid1D::uniform(0, 1, 7));
  KmdOptions opt;
  opt.horizon = 50;
  opt.eta_scale = 1e3;
  auto ks = init_kmd_state(7);
  auto ls = init_linear_kmd_state(7);
  Rng probe_rng(6);
  for (int step = 1; step <= 50; ++step) {
    const Vector c = stream.sample()->measure.weights();
    const Matrix theta_before = ls.theta;
    kmd_step(ks, Kernel::linear(), c, C, opt);
    linear_kmd_step(ls, c, C, opt);
    const auto kc = kmd_constants(Kernel::linear(), C, opt);
    EXPECT_LE((ls.theta - theta_before).norm(), kmd_eta(kc, opt, step) * kc.beta_scale * 2 * c.norm() + 1e-12);
    if (step == 3) {
      for (int p = 0; p < 10; ++p) {
        const Vector x = random_simplex(probe_rng, 7);
        EXPECT_LE((ls.theta * x - f_eval_raw(ks, Kernel::linear(), x)).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
  for (int p = 0; p < 10; ++p) {
    const Vector x = random_simplex(probe_rng, 7);
    const Vector a = ls.theta * x, b = f_eval_raw(ks, Kernel::linear(), x);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9 * (1 + b.cwiseAbs().maxCoeff()));
  }
}

TEST(LinearKmd, ColdStartMatchesKernelStep) {
  const Vector c = vec({0.7, 0.3});
  KmdOptions opt;
  opt.horizon = 5;
  auto ks = init_kmd_state(2);
  auto ls = init_linear_kmd_state(2);
  kmd_step(ks, Kernel::linear(), c, swap2(), opt);
  linear_kmd_step(ls, c, swap2(), opt);
  EXPECT_EQ(ks.primal.r, ls.primal.r);
  EXPECT_EQ(ls.theta, ks.betas[0] * c.transpose());
}

TEST(LinearKmd, IteratesCoincideWithKernelForm) {
  // 1e2 leaves about half of the f entries unclipped, 1e4 clips nearly all.
  for (double scale : {1e2, 1e4}) {
    auto a = random_stream(10, 40, 7), b = random_stream(10, 40, 7);
    const auto C = squared_distance_cost(Grid1D::uniform(-1, 1, 10));
    KmdOptions opt;
    opt.horizon = 500;
    opt.eta_scale = scale;
    auto ks = init_kmd_state(10);
    auto ls = init_linear_kmd_state(10);
    double worst = 0;
    for (int step = 0; step < 500; ++step) {
      kmd_step(ks, Kernel::linear(), a.sample()->measure.weights(), C, opt);
      linear_kmd_step(ls, b.sample()->measure.weights(), C, opt);
      worst = std::max(worst, ((ks.primal.r - ls.primal.r).array().abs() / ls.primal.r.array()).maxCoeff());
    }
    EXPECT_LE(worst, 1e-9) << "eta_scale " << scale;
    EXPECT_GT((ls.primal.r - Vector::Constant(10, 0.1)).cwiseAbs().maxCoeff(), 1e-2);  // the run actually moved
  }
}

TEST(KmdRun, SingleStepAndDeterminism) {
  const auto C = squared_distance_cost(Grid1D::uniform(0, 1, 4));
  auto s1 = random_stream(4, 5, 8);
  const auto one = kmd_run(s1, Kernel::rbf(), C, 1);
  auto s2 = random_stream(4, 5, 8);
  auto st = init_kmd_state(4);
  KmdOptions opt;
  opt.horizon = 1;
  kmd_step(st, Kernel::rbf(), s2.sample()->measure.weights(), C, opt);
  EXPECT_EQ(one.r_avg, st.primal.r);

  auto s3 = random_stream(4, 5, 9), s4 = random_stream(4, 5, 9);
  KmdOptions fast;
  fast.eta_scale = 100;
  EXPECT_EQ(kmd_run(s3, Kernel::diffusion(), C, 200, fast).r_avg, kmd_run(s4, Kernel::diffusion(), C, 200, fast).r_avg);
}

TEST(KmdRun, DegenerateStreamApproachesItsMeasure) {
  const Vector c0 = floor_clamped(vec({0.1, 0.6, 0.3}));
  const auto grid = Grid1D({0, 1, 2}, 0, 2);
  const auto C = squared_distance_cost(grid);
  for (bool online : {false, true}) {
    double prev = std::numeric_limits<double>::infinity();
    for (long N : {100L, 1000L, 10000L}) {
      MeasureStream s(FiniteSource{{c0}, vec({1.0})}, 1);
      const auto res = online ? kmd_run_online(s, Kernel::rbf(), C, N) : kmd_run(s, Kernel::rbf(), C, N);
      const double w = wasserstein_1d(res.r_avg, c0, grid, 1);
      EXPECT_LT(w, prev) << "N=" << N << " online=" << online;
      prev = w;
    }
  }
}

TEST(KmdRunOnline, StepsizeScalingAndFirstAverage) {
  const auto C = swap2();
  KmdOptions opt;
  opt.mode = StepMode::dynamic;
  const auto kc = kmd_constants(Kernel::rbf(), C, opt);
  EXPECT_DOUBLE_EQ(kmd_eta(kc, opt, 1) / kmd_eta(kc, opt, 4), 2.0);

  MeasureStream s(FiniteSource{{vec({0.3, 0.7})}, vec({1.0})}, 1);
  KmdOptions big;
  big.eta_scale = 100;
  const auto res = kmd_run_online(s, Kernel::rbf(), CostMatrix((Matrix(2, 2) << 0.5, 1, 1, 0).finished()), 1, big);
  auto st = init_kmd_state(2);
  big.mode = StepMode::dynamic;
  kmd_step(st, Kernel::rbf(), vec({0.3, 0.7}), CostMatrix((Matrix(2, 2) << 0.5, 1, 1, 0).finished()), big);
  EXPECT_EQ(res.r_avg, st.primal.r);
  EXPECT_NE(st.primal.r[0], 0.5);
}

TEST(KmdRun, TraceCarriesHistorySize) {
  const auto C = squared_distance_cost(Grid1D::uniform(0, 1, 4));
  auto s = random_stream(4, 5, 10);
  const auto res = kmd_run(s, Kernel::rbf(), C, 20, {}, 5);
  ASSERT_EQ(res.trace.size(), 4u);
  EXPECT_EQ(*res.trace.back().history_size, 20u);
  EXPECT_EQ(res.trace.front().iteration, 5);
}
