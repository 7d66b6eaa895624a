#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "bary/config.hpp"

using namespace bary;

namespace {

RunConfig sample_config() {
  RunConfig c;
  c.method.name = "kmd";
  c.method.kernel = "diffusion";
  c.method.kernel_param = 1e3;
  c.method.history_cap = 500;
  c.method.eta_scale = 0.1 + 0.2;  // not exactly representable in decimal
  c.data.n = 37;
  c.data.weights = {0.25, 0.75};
  c.cost.normalize = true;
  c.N = 1234;
  c.seed = 18446744073709551615ULL;
  c.output.report = "out/report.csv";
  return c;
}

}  // namespace

TEST(Config, RoundTripThroughJson) {
  const RunConfig c = sample_config();
  const json j = c;
  EXPECT_EQ(parse_config(json::parse(j.dump())), c);
  EXPECT_EQ(parse_config(json(RunConfig{})), RunConfig{});
}

TEST(Config, DefaultsFillMissingKeys) {
  const RunConfig c = parse_config(json::parse(R"({"method": {"name": "finite_md"}})"));
  EXPECT_EQ(c.method.name, "finite_md");
  EXPECT_EQ(c.N, RunConfig{}.N);
  EXPECT_EQ(c.checkpoint_every, 100);
  EXPECT_EQ(c.eval.holdout_size, 256);
  EXPECT_FALSE(c.seed);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(json::parse(R"({"Nn": 3})")), PreconditionError);
  EXPECT_THROW(parse_config(json::parse(R"({"method": {"gama": 1}})")), PreconditionError);
  EXPECT_THROW(parse_config(json::parse(R"({"N": "many"})")), PreconditionError);
  EXPECT_THROW(parse_config(json::parse(R"({"seed": -4})")), PreconditionError);
}

TEST(Config, ValidateRejectsBadRuns) {
  RunConfig c;
  c.N = 0;
  EXPECT_THROW(c.validate(), PreconditionError);
  c = RunConfig{};
  c.method.name = "kmd";
  c.N = 0;
  EXPECT_THROW(c.validate(), PreconditionError);
  c = RunConfig{};
  c.method.name = "newton";
  EXPECT_THROW(c.validate(), PreconditionError);
  c = RunConfig{};
  c.method.name = "lp_sgd";
  c.data.n = 65;
  EXPECT_THROW(c.validate(), PreconditionError);
  c.data.n = 64;
  EXPECT_NO_THROW(c.validate());
  c = RunConfig{};
  c.data.kind = "corpus";
  c.data.path = "/nonexistent/corpus.csv";
  EXPECT_THROW(c.validate(), PreconditionError);
  c = RunConfig{};
  c.data.sd_rate = 0;
  EXPECT_THROW(c.validate(), PreconditionError);
}

TEST(Config, OverridesWinAndParseTypes) {
  json j = sample_config();
  apply_override(j, "N=77");
  apply_override(j, "method.kernel=rbf");
  apply_override(j, "method.kernel_param=1e-3");
  apply_override(j, "cost.normalize=false");
  apply_override(j, "data.weights=[1,2,3]");
  apply_override(j, "output.trace=\"t.csv\"");
  const RunConfig c = parse_config(j);
  EXPECT_EQ(c.N, 77);
  EXPECT_EQ(c.method.kernel, "rbf");
  EXPECT_EQ(c.method.kernel_param, 1e-3);
  EXPECT_FALSE(c.cost.normalize);
  EXPECT_EQ(c.data.weights, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(c.output.trace, "t.csv");
}

TEST(Config, OverrideCreatesNestedObjects) {
  json j = json::object();
  apply_override(j, "eval.score_every=10");
  EXPECT_EQ(parse_config(j).eval.score_every, 10);
  EXPECT_THROW(apply_override(j, "noequals"), PreconditionError);
  EXPECT_THROW(apply_override(j, "eval..x=1"), PreconditionError);
  EXPECT_THROW(apply_override(j, "eval.score_every.x=1"), PreconditionError);
}

TEST(Config, HashIgnoresSeedAndOutputsOnly) {
  RunConfig a = sample_config(), b = a;
  b.seed = 3;
  b.output.report = "elsewhere.csv";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.N += 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, LoadFromFile) {
  const auto p = std::filesystem::temp_directory_path() / "bary_cfg.json";
  std::ofstream(p) << json(sample_config()).dump(2);
  EXPECT_EQ(parse_config(load_config_json(p)), sample_config());
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(load_config_json(p), PreconditionError);
  EXPECT_THROW(load_config_json("/nonexistent/x.json"), PreconditionError);
}

TEST(Config, ShippedConfigsParseAndValidate) {
  int seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(BARY_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    SCOPED_TRACE(entry.path().string());
    const RunConfig c = parse_config(load_config_json(entry.path()));
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(parse_config(json(c)), c);
    ++seen;
  }
  EXPECT_GE(seen, 5);
}
