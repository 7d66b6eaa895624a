#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bary/errors.hpp"
#include "bary/measures.hpp"

namespace bary {

using json = nlohmann::json;

struct MethodConfig {
  std::string name = "linear_kmd";  // finite_md | kmd | linear_kmd | sinkhorn_sgd | lp_sgd
  // kmd
  std::string kernel = "rbf";  // rbf | diffusion
  double kernel_param = 1e-3;  // s for rbf, t for diffusion
  double r_sq = 25.0;
  std::string stepsize = "constant";  // constant | dynamic
  std::string clip = "cost";          // cost (||C||_inf) | unit (+-1)
  std::optional<long> history_cap;
  // finite_md and kmd
  double eta_scale = 1.0;
  // baselines
  double gamma = 1e-2;
  long inner_iters = 100;
  double inner_tol = 1e-9;
  std::string schedule = "inverse_sqrt";  // constant | inverse_sqrt
  double step = 1.0;
  std::string stepper = "entropic";  // entropic | euclidean

  bool operator==(const MethodConfig&) const = default;
};

struct DataConfig {
  std::string kind = "gaussian";  // gaussian | corpus | finite
  double mean_mu = 1.0, mean_var = 4.0, sd_rate = 0.5;
  double lo = -10.0, hi = 10.0;
  long n = 100;
  long count = 10000;  // gen-data rows; measures of a finite problem built from the law
  std::string path;
  std::vector<double> weights;  // finite: law over the rows (empty = uniform)
  bool strict = false;          // corpus: stop at end instead of cycling

  GaussianParamLaw law() const { return {mean_mu, mean_var, sd_rate}; }
  bool operator==(const DataConfig&) const = default;
};

struct CostConfig {
  double p = 2.0;
  bool normalize = false;
  std::string path;  // optional CSV cost overriding the grid cost

  bool operator==(const CostConfig&) const = default;
};

struct EvalConfig {
  long score_every = 100;
  long holdout_size = 256;
  std::uint64_t holdout_seed = 0x5eed0ffULL;
  bool gap = true;

  bool operator==(const EvalConfig&) const = default;
};

struct OutputConfig {
  std::string report;
  std::string checkpoint;
  std::string trace;

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  MethodConfig method;
  DataConfig data;
  CostConfig cost;
  EvalConfig eval;
  OutputConfig output;
  long N = 1000;
  std::optional<std::uint64_t> seed;
  long checkpoint_every = 100;
  long exact_cap = 64;

  bool operator==(const RunConfig&) const = default;
  void validate() const;
};

namespace detail {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw PreconditionError(std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw PreconditionError("config: '" + where + "' must be an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw PreconditionError("config: unknown key '" + where + "." + it.key() + "'");
}

inline void one_of(const std::string& v, std::initializer_list<const char*> allowed, const std::string& key) {
  for (const char* a : allowed)
    if (v == a) return;
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  throw PreconditionError("config: " + key + " = '" + v + "' (expected one of " + list + ")");
}

}  // namespace detail

inline void to_json(json& j, const MethodConfig& m) {
  j = json{{"name", m.name},       {"kernel", m.kernel},     {"kernel_param", m.kernel_param},
           {"r_sq", m.r_sq},       {"stepsize", m.stepsize}, {"clip", m.clip},
           {"eta_scale", m.eta_scale}, {"gamma", m.gamma},   {"inner_iters", m.inner_iters},
           {"inner_tol", m.inner_tol}, {"schedule", m.schedule}, {"step", m.step},
           {"stepper", m.stepper}};
  j["history_cap"] = m.history_cap ? json(*m.history_cap) : json(nullptr);
}

inline void from_json(const json& j, MethodConfig& m) {
  detail::reject_unknown(j,
                         {"name", "kernel", "kernel_param", "r_sq", "stepsize", "clip", "history_cap", "eta_scale",
                          "gamma", "inner_iters", "inner_tol", "schedule", "step", "stepper"},
                         "method");
  detail::read(j, "name", m.name);
  detail::read(j, "kernel", m.kernel);
  detail::read(j, "kernel_param", m.kernel_param);
  detail::read(j, "r_sq", m.r_sq);
  detail::read(j, "stepsize", m.stepsize);
  detail::read(j, "clip", m.clip);
  if (auto it = j.find("history_cap"); it != j.end() && !it->is_null()) m.history_cap = it->get<long>();
  detail::read(j, "eta_scale", m.eta_scale);
  detail::read(j, "gamma", m.gamma);
  detail::read(j, "inner_iters", m.inner_iters);
  detail::read(j, "inner_tol", m.inner_tol);
  detail::read(j, "schedule", m.schedule);
  detail::read(j, "step", m.step);
  detail::read(j, "stepper", m.stepper);
}

inline void to_json(json& j, const DataConfig& d) {
  j = json{{"kind", d.kind}, {"mean_mu", d.mean_mu}, {"mean_var", d.mean_var}, {"sd_rate", d.sd_rate},
           {"lo", d.lo},     {"hi", d.hi},           {"n", d.n},               {"count", d.count},
           {"path", d.path}, {"weights", d.weights}, {"strict", d.strict}};
}

inline void from_json(const json& j, DataConfig& d) {
  detail::reject_unknown(
      j, {"kind", "mean_mu", "mean_var", "sd_rate", "lo", "hi", "n", "count", "path", "weights", "strict"}, "data");
  detail::read(j, "kind", d.kind);
  detail::read(j, "mean_mu", d.mean_mu);
  detail::read(j, "mean_var", d.mean_var);
  detail::read(j, "sd_rate", d.sd_rate);
  detail::read(j, "lo", d.lo);
  detail::read(j, "hi", d.hi);
  detail::read(j, "n", d.n);
  detail::read(j, "count", d.count);
  detail::read(j, "path", d.path);
  detail::read(j, "weights", d.weights);
  detail::read(j, "strict", d.strict);
}

inline void to_json(json& j, const CostConfig& c) { j = json{{"p", c.p}, {"normalize", c.normalize}, {"path", c.path}}; }

inline void from_json(const json& j, CostConfig& c) {
  detail::reject_unknown(j, {"p", "normalize", "path"}, "cost");
  detail::read(j, "p", c.p);
  detail::read(j, "normalize", c.normalize);
  detail::read(j, "path", c.path);
}

inline void to_json(json& j, const EvalConfig& e) {
  j = json{{"score_every", e.score_every},
           {"holdout_size", e.holdout_size},
           {"holdout_seed", e.holdout_seed},
           {"gap", e.gap}};
}

inline void from_json(const json& j, EvalConfig& e) {
  detail::reject_unknown(j, {"score_every", "holdout_size", "holdout_seed", "gap"}, "eval");
  detail::read(j, "score_every", e.score_every);
  detail::read(j, "holdout_size", e.holdout_size);
  detail::read(j, "holdout_seed", e.holdout_seed);
  detail::read(j, "gap", e.gap);
}

inline void to_json(json& j, const OutputConfig& o) {
  j = json{{"report", o.report}, {"checkpoint", o.checkpoint}, {"trace", o.trace}};
}

inline void from_json(const json& j, OutputConfig& o) {
  detail::reject_unknown(j, {"report", "checkpoint", "trace"}, "output");
  detail::read(j, "report", o.report);
  detail::read(j, "checkpoint", o.checkpoint);
  detail::read(j, "trace", o.trace);
}

inline void to_json(json& j, const RunConfig& c) {
  j = json{{"method", c.method},
           {"data", c.data},
           {"cost", c.cost},
           {"eval", c.eval},
           {"output", c.output},
           {"N", c.N},
           {"checkpoint_every", c.checkpoint_every},
           {"exact_cap", c.exact_cap}};
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
}

inline void from_json(const json& j, RunConfig& c) {
  detail::reject_unknown(j, {"method", "data", "cost", "eval", "output", "N", "seed", "checkpoint_every", "exact_cap"},
                         "config");
  detail::read(j, "method", c.method);
  detail::read(j, "data", c.data);
  detail::read(j, "cost", c.cost);
  detail::read(j, "eval", c.eval);
  detail::read(j, "output", c.output);
  detail::read(j, "N", c.N);
  if (auto it = j.find("seed"); it != j.end() && !it->is_null()) {
    if (!it->is_number_unsigned()) throw PreconditionError("config: seed must be a non-negative integer");
    c.seed = it->get<std::uint64_t>();
  }
  detail::read(j, "checkpoint_every", c.checkpoint_every);
  detail::read(j, "exact_cap", c.exact_cap);
}

inline void RunConfig::validate() const {
  using detail::one_of;
  one_of(method.name, {"finite_md", "kmd", "linear_kmd", "sinkhorn_sgd", "lp_sgd"}, "method.name");
  one_of(method.kernel, {"rbf", "diffusion"}, "method.kernel");
  one_of(method.stepsize, {"constant", "dynamic"}, "method.stepsize");
  one_of(method.clip, {"cost", "unit"}, "method.clip");
  one_of(method.schedule, {"constant", "inverse_sqrt"}, "method.schedule");
  one_of(method.stepper, {"entropic", "euclidean"}, "method.stepper");
  one_of(data.kind, {"gaussian", "corpus", "finite"}, "data.kind");
  if (N < 1) throw PreconditionError("config: N must be >= 1");
  if (!(method.eta_scale > 0.0)) throw PreconditionError("config: method.eta_scale must be positive");
  if (method.history_cap && *method.history_cap < 1) throw PreconditionError("config: method.history_cap must be >= 1");
  if (checkpoint_every < 0) throw PreconditionError("config: checkpoint_every must be >= 0");
  if (eval.score_every < 0) throw PreconditionError("config: eval.score_every must be >= 0");
  if (eval.holdout_size < 1) throw PreconditionError("config: eval.holdout_size must be >= 1");
  if (exact_cap < 2) throw PreconditionError("config: exact_cap must be >= 2");
  if (data.kind == "gaussian") {
    data.law().validate();
    if (data.n < 2) throw PreconditionError("config: data.n must be >= 2");
    if (!(data.lo < data.hi)) throw PreconditionError("config: data.lo must be < data.hi");
    if (data.count < 1) throw PreconditionError("config: data.count must be >= 1");
    if (method.name == "lp_sgd" && data.n > exact_cap)
      throw PreconditionError("config: lp_sgd needs n <= exact_cap (" + std::to_string(exact_cap) + "), got n = " +
                              std::to_string(data.n));
  } else {
    if (data.path.empty()) throw PreconditionError("config: data.path is required for data.kind = " + data.kind);
    if (!std::filesystem::exists(data.path)) throw PreconditionError("config: data.path " + data.path + " does not exist");
  }
  if (!cost.path.empty() && !std::filesystem::exists(cost.path))
    throw PreconditionError("config: cost.path " + cost.path + " does not exist");
  if (!(cost.p >= 1.0)) throw PreconditionError("config: cost.p must be >= 1");
}

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  try {
    c = j.get<RunConfig>();
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("config: ") + e.what());
  }
  return c;
}

inline json load_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("config: cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw PreconditionError("config: " + path.string() + ": " + e.what());
  }
}

/// Applies `key.path=value`. The value is read as JSON when it parses
/// (numbers, booleans, null, quoted strings, arrays) and as a bare string otherwise.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw PreconditionError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw PreconditionError("--set: empty path segment in '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    json& child = (*node)[part];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw PreconditionError("--set: '" + part + "' is not an object in '" + key + "'");
    node = &child;
    start = dot + 1;
  }
}

/// FNV-1a over the canonical dump of the configuration, leaving out the
/// seed and output paths so replicas of one setup share a hash.
inline std::string config_hash(const RunConfig& c) {
  json j = c;
  j.erase("seed");
  j.erase("output");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace bary
