#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bary/certify.hpp"
#include "bary/experiment.hpp"

using namespace bary;

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumerical = 2, kCertify = 3 };

struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_config_args(CLI::App* cmd, ConfigArgs& a, bool required = true) {
  auto* opt = cmd->add_option("-c,--config", a.path, "JSON run configuration");
  if (required) opt->required();
  cmd->add_option("--set", a.sets, "override a config entry, key.path=value (repeatable)");
  cmd->add_option("--seed", a.seed, "seed (overrides config and BARY_SEED)");
}

RunConfig load_config(const ConfigArgs& a) {
  json j = a.path.empty() ? json::object() : load_config_json(a.path);
  for (const auto& s : a.sets) apply_override(j, s);
  RunConfig cfg = parse_config(j);
  return cfg;
}

std::string with_seed_suffix(const std::string& path, std::uint64_t seed) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  const std::string stem = p.stem().string(), ext = p.extension().string();
  return (p.parent_path() / (stem + ".seed" + std::to_string(seed) + ext)).string();
}

void print_summary(const Experiment& e) {
  std::ostringstream os;
  os << e.config().method.name << " seed=" << e.seed() << " k=" << e.k();
  if (!e.report().rows.empty()) {
    const auto& last = e.report().rows.back();
    if (last.w2_to_truth) os << " W2_to_truth=" << detail::format_double(*last.w2_to_truth);
    if (last.gap_surrogate) os << " gap_surrogate=" << detail::format_double(*last.gap_surrogate);
  }
  if (e.exhausted()) os << " (stream exhausted)";
  std::cout << os.str() << '\n';
}

int drive(Experiment& e, long stop_after) {
  e.run(stop_after);
  e.write_outputs();
  print_summary(e);
  return kOk;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    if (!e.state_dump().empty()) std::cerr << e.state_dump() << '\n';
    return kNumerical;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return kConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
}

int cmd_gen_data(const ConfigArgs& a, const std::string& out_path) {
  const RunConfig cfg = load_config(a);
  const auto seed = resolve_seed(a.seed, cfg);
  const std::string path = out_path.empty() ? cfg.data.path : out_path;
  if (path.empty()) throw PreconditionError("gen-data: no output path (--out or data.path)");
  const Corpus c = generate_corpus(cfg, seed);
  std::ostringstream os;
  write_corpus(os, c);
  write_file_atomic(path, os.str());
  std::cout << "wrote " << c.rows.size() << " measures on " << c.grid->size() << " points to " << path << '\n';
  return kOk;
}

int cmd_run(const ConfigArgs& a, int parallel, long stop_after) {
  RunConfig cfg = load_config(a);
  const auto base_seed = resolve_seed(a.seed, cfg);
  cfg.validate();
  if (parallel <= 1) {
    Experiment e(cfg, base_seed);
    return drive(e, stop_after);
  }
  std::vector<int> codes(static_cast<std::size_t>(parallel), kOk);
  std::vector<std::thread> pool;
  std::mutex io;
  for (int i = 0; i < parallel; ++i) {
    pool.emplace_back([&, i] {
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
      RunConfig c = cfg;
      c.seed = seed;
      c.output.report = with_seed_suffix(cfg.output.report, seed);
      c.output.checkpoint = with_seed_suffix(cfg.output.checkpoint, seed);
      c.output.trace = with_seed_suffix(cfg.output.trace, seed);
      codes[static_cast<std::size_t>(i)] = guarded([&] {
        Experiment e(c, seed);
        e.run(stop_after);
        e.write_outputs();
        std::lock_guard lock(io);
        print_summary(e);
        return int(kOk);
      });
    });
  }
  for (auto& t : pool) t.join();
  int worst = kOk;
  for (int c : codes) worst = std::max(worst, c);
  return worst;
}

int cmd_resume(const std::string& checkpoint, long stop_after) {
  auto e = Experiment::restore_file(checkpoint);
  return drive(*e, stop_after);
}

std::vector<Vector> load_estimates(const std::string& estimate, const std::string& checkpoint) {
  if (!estimate.empty()) {
    auto rows = load_corpus(estimate).rows;
    for (auto& r : rows) r = normalize(r).weights();
    return rows;
  }
  return {Experiment::restore_file(checkpoint)->estimate()};
}

int cmd_eval(const ConfigArgs& a, const std::string& estimate, const std::string& checkpoint) {
  if (estimate.empty() == checkpoint.empty()) throw PreconditionError("eval: give exactly one of --estimate, --checkpoint");
  RunConfig cfg;
  std::uint64_t seed = 0;
  if (!checkpoint.empty() && a.path.empty()) {
    auto e = Experiment::restore_file(checkpoint);
    cfg = e->config();
    seed = e->seed();
  } else {
    cfg = load_config(a);
    seed = resolve_seed(a.seed, cfg);
  }
  const ExperimentData d = build_data(cfg, seed);
  const auto ests = load_estimates(estimate, checkpoint);
  std::cout << "row,W2_to_truth,gap_surrogate\n";
  for (std::size_t i = 0; i < ests.size(); ++i) {
    if (static_cast<std::size_t>(ests[i].size()) != d.C.size())
      throw PreconditionError("eval: estimate " + std::to_string(i) + " has the wrong dimension");
    std::cout << i << ',';
    if (d.truth && d.grid) std::cout << detail::format_double(score(ests[i], *d.truth, *d.grid));
    std::cout << ',';
    if (!d.holdout.empty()) std::cout << detail::format_double(gap_surrogate(ests[i], d.holdout, d.C, exact_options(cfg)));
    std::cout << '\n';
  }
  return kOk;
}

int cmd_certify(long n_min, long n_max, long instances, std::optional<std::uint64_t> seed_flag, double tol) {
  RunConfig none;
  const auto seed = resolve_seed(seed_flag, none);
  if (instances == 0) {
    std::cerr << "warning: certify with 0 instances is a vacuous pass\n";
  }
  const auto s = certify_random(n_min, n_max, instances, seed, tol);
  std::cout << "certify: " << s.certified << "/" << s.instances << " instances certified (n in [" << n_min << ", "
            << n_max << "], seed " << seed << ", tol " << tol << ")\n";
  std::cout << "max |box - exact|: " << detail::format_double(s.max_abs_diff) << '\n';
  std::cout << "instance digest: " << s.digest << '\n';
  if (!s.passed()) {
    std::cout << "failed instances:";
    for (long i : s.failures) std::cout << ' ' << i;
    std::cout << '\n';
    return kCertify;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein barycenters of measure streams"};
  app.require_subcommand(1);

  ConfigArgs gen_args, run_args, eval_args;
  std::string gen_out, eval_estimate, eval_checkpoint, resume_checkpoint;
  int parallel = 1;
  long run_stop = -1, resume_stop = -1;
  long n_min = 2, n_max = 6, instances = 200;
  std::optional<std::uint64_t> certify_seed;
  double tol = 1e-7;

  auto* gen = app.add_subcommand("gen-data", "write a Gaussian measure corpus");
  add_config_args(gen, gen_args);
  gen->add_option("-o,--out", gen_out, "output CSV (default: data.path)");

  auto* run = app.add_subcommand("run", "run one method and write report, trace and checkpoint");
  add_config_args(run, run_args);
  run->add_option("--parallel-seeds", parallel, "independent replicas with seeds seed, seed+1, ...")
      ->check(CLI::PositiveNumber);
  run->add_option("--stop-after", run_stop, "stop after this many samples (resumable)");

  auto* res = app.add_subcommand("resume", "continue a run from its checkpoint");
  res->add_option("checkpoint", resume_checkpoint, "checkpoint JSON")->required();
  res->add_option("--stop-after", resume_stop, "stop after this many samples in total");

  auto* ev = app.add_subcommand("eval", "score estimates against the truth and the holdout");
  add_config_args(ev, eval_args, false);
  ev->add_option("--estimate", eval_estimate, "CSV of estimates, one per row");
  ev->add_option("--checkpoint", eval_checkpoint, "score the averaged iterate of a checkpoint");

  auto* cert = app.add_subcommand("certify", "check the dual bound on random instances");
  cert->add_option("--n-min", n_min, "smallest support size");
  cert->add_option("--n-max", n_max, "largest support size");
  cert->add_option("--instances", instances, "number of instances")->check(CLI::NonNegativeNumber);
  cert->add_option("--seed", certify_seed, "seed (falls back to BARY_SEED)");
  cert->add_option("--tol", tol, "absolute tolerance on the optimal values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*gen) return guarded([&] { return cmd_gen_data(gen_args, gen_out); });
  if (*run) return guarded([&] { return cmd_run(run_args, parallel, run_stop); });
  if (*res) return guarded([&] { return cmd_resume(resume_checkpoint, resume_stop); });
  if (*ev) return guarded([&] { return cmd_eval(eval_args, eval_estimate, eval_checkpoint); });
  if (*cert) return guarded([&] { return cmd_certify(n_min, n_max, instances, certify_seed, tol); });
  return kConfig;
}
