#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bary/experiment.hpp"

using namespace bary;

namespace {

constexpr double kUniformBaselineW2 = 4.028100573046018;

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("bary_exp_" + name);
}

RunConfig small_config(const std::string& method) {
  RunConfig c;
  c.method.name = method;
  c.data.n = 10;
  c.data.count = 5;
  c.cost.normalize = true;
  c.N = 100;
  c.seed = 42;
  c.eval.score_every = 25;
  c.eval.holdout_size = 16;
  c.method.eta_scale = (method == "finite_md") ? 1.0 : 1e3;
  if (method == "kmd") c.method.kernel_param = 0.5;
  return c;
}

std::vector<RunConfig> every_method() {
  std::vector<RunConfig> out;
  for (const char* m : {"finite_md", "kmd", "linear_kmd", "sinkhorn_sgd", "lp_sgd"}) out.push_back(small_config(m));
  RunConfig dyn = small_config("kmd");
  dyn.method.kernel = "diffusion";
  dyn.method.kernel_param = 1.0;
  dyn.method.stepsize = "dynamic";
  out.push_back(dyn);
  RunConfig euc = small_config("sinkhorn_sgd");
  euc.method.stepper = "euclidean";
  euc.method.step = 0.1;
  out.push_back(euc);
  return out;
}

void expect_same_rows(const ExperimentReport& a, const ExperimentReport& b) {
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].samples_processed, b.rows[i].samples_processed);
    EXPECT_EQ(a.rows[i].w2_to_truth, b.rows[i].w2_to_truth);
    EXPECT_EQ(a.rows[i].gap_surrogate, b.rows[i].gap_surrogate);
  }
}

}  // namespace

TEST(Experiment, ResumeMatchesUninterruptedRunBitForBit) {
  for (const auto& cfg : every_method()) {
    SCOPED_TRACE(cfg.method.name + "/" + cfg.method.stepsize + "/" + cfg.method.stepper);
    Experiment full(cfg, *cfg.seed);
    full.run();

    Experiment half(cfg, *cfg.seed);
    half.run(50);
    ASSERT_EQ(half.k(), 50);
    const std::string saved = half.checkpoint().dump();
    auto resumed = Experiment::restore(json::parse(saved));
    resumed->run();

    ASSERT_EQ(resumed->k(), 100);
    const Vector a = full.estimate(), b = resumed->estimate();
    ASSERT_EQ(a.size(), b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
    EXPECT_EQ(full.checkpoint()["state"], resumed->checkpoint()["state"]);
    expect_same_rows(full.report(), resumed->report());
  }
}

TEST(Experiment, DeterministicUnderSeedAndSensitiveToIt) {
  const RunConfig cfg = small_config("linear_kmd");
  Experiment a(cfg, 7), b(cfg, 7), c(cfg, 8);
  a.run();
  b.run();
  c.run();
  EXPECT_EQ(a.estimate(), b.estimate());
  EXPECT_NE(a.estimate(), c.estimate());
}

TEST(Experiment, ReportRowsAtCadenceAndHorizon) {
  RunConfig cfg = small_config("sinkhorn_sgd");
  cfg.N = 90;
  cfg.eval.score_every = 40;
  Experiment e(cfg, 1);
  e.run();
  std::vector<long> ks;
  for (const auto& r : e.report().rows) ks.push_back(r.samples_processed);
  EXPECT_EQ(ks, (std::vector<long>{40, 80, 90}));
  for (const auto& r : e.report().rows) {
    ASSERT_TRUE(r.w2_to_truth);
    ASSERT_TRUE(r.gap_surrogate);
    EXPECT_TRUE(std::isfinite(*r.w2_to_truth));
    EXPECT_GE(*r.gap_surrogate, -1e-9);
  }
  EXPECT_EQ(e.report().config_hash, config_hash(cfg));
}

TEST(Experiment, GapColumnBlankAboveExactCap) {
  RunConfig cfg = small_config("linear_kmd");
  cfg.data.n = 100;
  Experiment e(cfg, 1);
  e.run(25);
  ASSERT_EQ(e.report().rows.size(), 1u);
  EXPECT_TRUE(e.report().rows[0].w2_to_truth);
  EXPECT_FALSE(e.report().rows[0].gap_surrogate);
}

TEST(Experiment, FiniteMdTraceCarriesExactGap) {
  Experiment e(small_config("finite_md"), 3);
  e.run();
  ASSERT_FALSE(e.trace().empty());
  for (const auto& t : e.trace()) {
    ASSERT_TRUE(t.gap);
    EXPECT_GE(*t.gap, -1e-9);
  }
}

TEST(Experiment, KmdTraceHistorySize) {
  Experiment e(small_config("kmd"), 3);
  e.run();
  for (const auto& t : e.trace()) EXPECT_EQ(t.history_size, static_cast<std::size_t>(t.iteration));
}

TEST(Experiment, StrictCorpusStopsAtItsEnd) {
  const auto path = tmp("strict.csv");
  std::ofstream(path) << "0.5,0.5,0\n0,0.5,0.5\n0.2,0.2,0.6\n";
  RunConfig cfg = small_config("sinkhorn_sgd");
  cfg.data.kind = "corpus";
  cfg.data.path = path.string();
  cfg.data.strict = true;
  cfg.N = 10;
  Experiment e(cfg, 1);
  e.run();
  EXPECT_TRUE(e.exhausted());
  EXPECT_EQ(e.k(), 3);
  ASSERT_FALSE(e.report().rows.empty());
  EXPECT_EQ(e.report().rows.back().samples_processed, 3);
  EXPECT_FALSE(e.report().rows.back().w2_to_truth);  // no truth for a corpus
  EXPECT_TRUE(e.report().rows.back().gap_surrogate);
}

TEST(Experiment, FiniteDataUsesConfiguredWeights) {
  const auto path = tmp("finite.csv");
  std::ofstream(path) << "1,0,0\n0,0,1\n";
  RunConfig cfg = small_config("finite_md");
  cfg.data.kind = "finite";
  cfg.data.path = path.string();
  cfg.data.weights = {1, 3};
  Experiment e(cfg, 1);
  EXPECT_NEAR(e.data().weights[1], 0.75, 1e-15);
  cfg.data.weights = {1, 2, 3};
  EXPECT_THROW(Experiment(cfg, 1), PreconditionError);
}

TEST(Experiment, LpSgdAboveCapRejectedBeforeWork) {
  const auto path = tmp("wide.csv");
  {
    std::ofstream out(path);
    for (int i = 0; i < 70; ++i) out << (i ? "," : "") << 1;
    out << '\n';
  }
  RunConfig cfg = small_config("lp_sgd");
  cfg.data.kind = "corpus";
  cfg.data.path = path.string();
  EXPECT_THROW(Experiment(cfg, 1), PreconditionError);
}

TEST(Experiment, CostSizeMismatchRejected) {
  const auto cpath = tmp("cost.csv");
  std::ofstream(cpath) << "0,1\n1,0\n";
  RunConfig cfg = small_config("linear_kmd");
  cfg.cost.path = cpath.string();
  EXPECT_THROW(Experiment(cfg, 1), PreconditionError);
}

TEST(Experiment, SeedResolutionOrder) {
  RunConfig cfg;
  ::unsetenv("BARY_SEED");
  EXPECT_THROW(resolve_seed(std::nullopt, cfg), PreconditionError);
  ::setenv("BARY_SEED", "17", 1);
  EXPECT_EQ(resolve_seed(std::nullopt, cfg), 17u);
  cfg.seed = 5;
  EXPECT_EQ(resolve_seed(std::nullopt, cfg), 5u);
  EXPECT_EQ(resolve_seed(9, cfg), 9u);
  cfg.seed.reset();
  ::setenv("BARY_SEED", "12x", 1);
  EXPECT_THROW(resolve_seed(std::nullopt, cfg), PreconditionError);
  ::unsetenv("BARY_SEED");
}

TEST(Experiment, OutputsWrittenWithSchema) {
  RunConfig cfg = small_config("linear_kmd");
  cfg.output.report = tmp("out/report.csv").string();
  cfg.output.trace = tmp("out/trace.csv").string();
  cfg.output.checkpoint = tmp("out/ck.json").string();
  Experiment e(cfg, 2);
  e.run();
  e.write_outputs();
  std::ifstream rin(cfg.output.report);
  std::string line;
  std::getline(rin, line);
  EXPECT_EQ(line, "# method: linear_kmd");
  std::getline(rin, line);
  EXPECT_EQ(line, "# seed: 2");
  std::getline(rin, line);
  std::getline(rin, line);
  EXPECT_EQ(line, "samples_processed,W2_to_truth,gap_surrogate,wall_ns");
  std::ifstream tin(cfg.output.trace);
  std::getline(tin, line);
  EXPECT_EQ(line, "iteration,eta,gap,elapsed_ns");
  auto back = Experiment::restore_file(cfg.output.checkpoint);
  EXPECT_EQ(back->k(), 100);
  EXPECT_EQ(back->estimate(), e.estimate());
  EXPECT_FALSE(std::filesystem::exists(cfg.output.checkpoint + ".tmp"));
}

TEST(Experiment, CheckpointRejectsWrongVersion) {
  Experiment e(small_config("linear_kmd"), 2);
  json ck = e.checkpoint();
  ck["version"] = 99;
  EXPECT_THROW(Experiment::restore(ck), PreconditionError);
}

TEST(Experiment, NonFiniteDoublesSurviveCheckpoint) {
  const Vector v = (Vector(3) << 1.5, -std::numeric_limits<double>::infinity(), 0.1).finished();
  const Vector back = detail::decode_vector(json::parse(detail::encode_vector(v).dump()));
  EXPECT_EQ(back[0], 1.5);
  EXPECT_TRUE(std::isinf(back[1]) && back[1] < 0);
  EXPECT_EQ(back[2], 0.1);
}

TEST(Experiment, GenerateCorpusDeterministic) {
  RunConfig cfg;
  cfg.data.n = 4;
  cfg.data.count = 3;
  const Corpus a = generate_corpus(cfg, 5), b = generate_corpus(cfg, 5);
  ASSERT_EQ(a.rows.size(), 3u);
  std::ostringstream sa, sb;
  write_corpus(sa, a);
  write_corpus(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  for (const auto& r : a.rows) {
    EXPECT_EQ(r.size(), 4);
    EXPECT_NEAR(r.sum(), 1.0, 1e-12);
    EXPECT_GE(r.minCoeff(), 0.0);
  }
}

TEST(Experiment, LinearKmdBeatsUniformBaselineOnGaussianConfig) {
  RunConfig cfg;
  cfg.method.name = "linear_kmd";
  cfg.method.eta_scale = 1e5;
  cfg.cost.normalize = true;
  cfg.N = 1000;
  cfg.seed = 1;
  Experiment e(cfg, 1);
  e.run();
  ASSERT_TRUE(e.report().rows.back().w2_to_truth);
  EXPECT_LT(*e.report().rows.back().w2_to_truth, kUniformBaselineW2);
}
