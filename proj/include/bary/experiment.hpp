#pragma once

#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bary/baselines.hpp"
#include "bary/config.hpp"
#include "bary/eval.hpp"
#include "bary/finite_md.hpp"
#include "bary/kmd.hpp"
#include "bary/trace.hpp"

namespace bary {

inline constexpr int kCheckpointVersion = 1;

// ---------------------------------------------------------------------------
// JSON encoding of numeric state. Doubles round-trip exactly through the
// shortest representation; non-finite entries (log 0 in the Euclidean
// baseline) are stored as strings.

namespace detail {

inline json encode_double(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline double decode_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw PreconditionError("checkpoint: bad number '" + s + "'");
}

inline json encode_vector(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(encode_double(v[i]));
  return a;
}

inline Vector decode_vector(const json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = decode_double(a[i]);
  return v;
}

inline json encode_matrix(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) data.push_back(encode_double(m.data()[i]));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix decode_matrix(const json& j) {
  Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != m.size()) throw PreconditionError("checkpoint: matrix size mismatch");
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = decode_double(data[static_cast<std::size_t>(i)]);
  return m;
}

inline json encode_vectors(const std::vector<Vector>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(encode_vector(v));
  return a;
}

inline std::vector<Vector> decode_vectors(const json& a) {
  std::vector<Vector> out;
  out.reserve(a.size());
  for (const auto& v : a) out.push_back(decode_vector(v));
  return out;
}

inline json encode_primal(const KmdPrimal& p) {
  return json{{"log_r", encode_vector(p.log_r)}, {"r", encode_vector(p.r)},   {"r_avg", encode_vector(p.r_avg)},
              {"k", p.k},                        {"weight_sum", p.weight_sum}, {"last_eta", p.last_eta}};
}

inline KmdPrimal decode_primal(const json& j) {
  KmdPrimal p;
  p.log_r = decode_vector(j.at("log_r"));
  p.r = decode_vector(j.at("r"));
  p.r_avg = decode_vector(j.at("r_avg"));
  p.k = j.at("k").get<long>();
  p.weight_sum = j.at("weight_sum").get<double>();
  p.last_eta = j.at("last_eta").get<double>();
  return p;
}

inline json encode_opt(const std::optional<double>& x) { return x ? encode_double(*x) : json(nullptr); }
inline std::optional<double> decode_opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return decode_double(j);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Data and cost assembled from a configuration

struct ExperimentData {
  std::shared_ptr<const Grid1D> grid;  // null when the support is abstract
  CostMatrix C;
  std::optional<Vector> truth;
  std::vector<Vector> holdout;
  std::vector<Vector> rows;  // finite/corpus rows, or the sampled finite problem
  Vector weights;            // law over rows (finite data)
  std::optional<MeasureStream::Source> source;
};

inline std::vector<Vector> gaussian_rows(const DataConfig& d, const std::shared_ptr<const Grid1D>& grid,
                                         std::uint64_t seed) {
  MeasureStream stream(GaussianSource{d.law(), grid}, seed);
  std::vector<Vector> rows;
  rows.reserve(static_cast<std::size_t>(d.count));
  for (long i = 0; i < d.count; ++i) rows.push_back(stream.sample()->measure.weights());
  return rows;
}

/// gen-data: `count` Gaussian measures on the configured grid.
inline Corpus generate_corpus(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.data.kind != "gaussian") throw PreconditionError("gen-data: requires data.kind = gaussian");
  cfg.data.law().validate();
  if (cfg.data.n < 2 || cfg.data.count < 1 || !(cfg.data.lo < cfg.data.hi))
    throw PreconditionError("gen-data: need data.n >= 2, data.count >= 1 and lo < hi");
  auto grid = std::make_shared<const Grid1D>(Grid1D::uniform(cfg.data.lo, cfg.data.hi, static_cast<std::size_t>(cfg.data.n)));
  Corpus c;
  c.grid = *grid;
  c.rows = gaussian_rows(cfg.data, grid, seed);
  return c;
}

inline ExperimentData build_data(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& d = cfg.data;
  std::shared_ptr<const Grid1D> grid;
  std::vector<Vector> rows;
  Vector weights;
  if (d.kind == "gaussian") {
    grid = std::make_shared<const Grid1D>(Grid1D::uniform(d.lo, d.hi, static_cast<std::size_t>(d.n)));
    if (cfg.method.name == "finite_md") rows = gaussian_rows(d, grid, seed);
  } else {
    Corpus corpus = load_corpus(d.path);
    if (corpus.rows.empty()) throw PreconditionError("config: " + d.path + " holds no measures");
    if (corpus.grid) grid = std::make_shared<const Grid1D>(*corpus.grid);
    rows = std::move(corpus.rows);
    for (auto& r : rows) r = normalize(r).weights();
  }
  if (!rows.empty()) {
    if (d.kind == "finite" && !d.weights.empty()) {
      if (d.weights.size() != rows.size())
        throw PreconditionError("config: data.weights has " + std::to_string(d.weights.size()) + " entries for " +
                                std::to_string(rows.size()) + " measures");
      weights = normalize(Eigen::Map<const Vector>(d.weights.data(), static_cast<Eigen::Index>(d.weights.size())))
                    .weights();
    } else {
      weights = Vector::Constant(static_cast<Eigen::Index>(rows.size()), 1.0 / static_cast<double>(rows.size()));
    }
  }
  const std::size_t n = grid ? grid->size() : static_cast<std::size_t>(rows.front().size());

  Matrix cm;
  if (!cfg.cost.path.empty()) cm = load_cost_csv(cfg.cost.path).entries();
  else if (grid) cm = squared_distance_cost(*grid, cfg.cost.p).entries();
  else cm = squared_distance_cost(Grid1D::uniform(0.0, static_cast<double>(n - 1), n), cfg.cost.p).entries();
  CostMatrix C(std::move(cm));
  if (cfg.cost.normalize) C = C.normalized();
  if (C.size() != n)
    throw PreconditionError("config: cost is " + std::to_string(C.size()) + "x" + std::to_string(C.size()) +
                            " but measures have " + std::to_string(n) + " atoms");
  if (!(C.inf_norm() > 0.0)) throw PreconditionError("config: cost matrix is identically zero");

  ExperimentData out{grid, std::move(C), std::nullopt, {}, {}, {}, std::nullopt};
  const auto hsize = static_cast<std::size_t>(cfg.eval.holdout_size);
  if (d.kind == "gaussian") {
    out.truth = true_gaussian_barycenter(d.law(), grid).weights();
    if (cfg.eval.gap && n <= static_cast<std::size_t>(cfg.exact_cap))
      out.holdout = make_holdout(d.law(), grid, hsize, cfg.eval.holdout_seed);
    if (cfg.method.name != "finite_md") out.source = GaussianSource{d.law(), grid};
  } else {
    if (cfg.eval.gap && n <= static_cast<std::size_t>(cfg.exact_cap))
      out.holdout.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(hsize, rows.size())));
    if (d.kind == "finite") out.source = FiniteSource{rows, weights};
    else out.source = CorpusSource{rows, grid, d.strict};
  }
  out.rows = std::move(rows);
  out.weights = std::move(weights);
  return out;
}

inline ExactOtOptions exact_options(const RunConfig& cfg) {
  ExactOtOptions o;
  o.max_n = static_cast<std::size_t>(cfg.exact_cap);
  return o;
}

inline KmdOptions kmd_options(const RunConfig& cfg) {
  KmdOptions o;
  o.mode = cfg.method.stepsize == "dynamic" ? StepMode::dynamic : StepMode::constant;
  o.horizon = cfg.N;
  o.eta_scale = cfg.method.eta_scale;
  o.clip = cfg.method.clip == "unit" ? ClipMode::unit : ClipMode::cost;
  if (cfg.method.history_cap) o.history_cap = static_cast<std::size_t>(*cfg.method.history_cap);
  return o;
}

inline Kernel kernel_from(const MethodConfig& m) {
  return m.kernel == "diffusion" ? Kernel::diffusion(m.kernel_param, m.r_sq) : Kernel::rbf(m.kernel_param, m.r_sq);
}

inline BaselineConfig baseline_config(const RunConfig& cfg) {
  BaselineConfig b;
  b.method = cfg.method.name == "lp_sgd" ? BaselineMethod::lp_sgd : BaselineMethod::sinkhorn_sgd;
  b.gamma = cfg.method.gamma;
  b.inner_iters = cfg.method.inner_iters;
  b.inner_tol = cfg.method.inner_tol;
  b.schedule = cfg.method.schedule == "constant" ? ScheduleKind::constant : ScheduleKind::inverse_sqrt;
  b.step = cfg.method.step;
  b.stepper = cfg.method.stepper == "euclidean" ? Stepper::euclidean : Stepper::entropic;
  b.exact = exact_options(cfg);
  return b;
}

// ---------------------------------------------------------------------------
// Runners: one per method, stepping one sample at a time

class Runner {
 public:
  virtual ~Runner() = default;
  /// Advances by one sample; false when the stream is exhausted.
  virtual bool step() = 0;
  virtual long k() const = 0;
  virtual Vector estimate() const = 0;
  virtual double last_eta() const = 0;
  virtual std::optional<std::size_t> history_size() const { return std::nullopt; }
  /// Exact duality gap of the current iterate pair, where one exists.
  virtual std::optional<double> exact_gap() const { return std::nullopt; }
  virtual json save() const = 0;
  virtual void load(const json& j) = 0;
};

class FiniteRunner final : public Runner {
 public:
  FiniteRunner(FiniteProblem p, long N, std::uint64_t seed, double eta_scale, ExactOtOptions exact, bool gap)
      : p_(std::move(p)), s_(init_finite_state(p_, N, seed, eta_scale)), exact_(exact), gap_(gap) {}

  bool step() override {
    md_step(s_, p_);
    return true;
  }
  long k() const override { return s_.k; }
  Vector estimate() const override { return s_.r_avg; }
  double last_eta() const override { return s_.eta; }
  std::optional<double> exact_gap() const override {
    if (!gap_ || p_.C.size() > exact_.max_n) return std::nullopt;
    return duality_gap_finite(s_.r_avg, s_.M_avg(), p_, exact_);
  }
  json save() const override {
    using namespace detail;
    return json{{"log_r", encode_vector(s_.log_r)}, {"r", encode_vector(s_.r)},
                {"r_avg", encode_vector(s_.r_avg)}, {"M", encode_matrix(s_.M)},
                {"M_sum", encode_matrix(s_.M_sum)}, {"last_touch", s_.last_touch},
                {"k", s_.k},                        {"eta", s_.eta},
                {"alpha", s_.alpha},                {"beta", s_.beta},
                {"rng", s_.rng.state()}};
  }
  void load(const json& j) override {
    using namespace detail;
    s_.log_r = decode_vector(j.at("log_r"));
    s_.r = decode_vector(j.at("r"));
    s_.r_avg = decode_vector(j.at("r_avg"));
    s_.M = decode_matrix(j.at("M"));
    s_.M_sum = decode_matrix(j.at("M_sum"));
    s_.last_touch = j.at("last_touch").get<std::vector<long>>();
    s_.k = j.at("k").get<long>();
    s_.eta = j.at("eta").get<double>();
    s_.alpha = j.at("alpha").get<double>();
    s_.beta = j.at("beta").get<double>();
    s_.rng.set_state(j.at("rng").get<std::uint64_t>());
  }

 private:
  FiniteProblem p_;
  FiniteSaddleState s_;
  ExactOtOptions exact_;
  bool gap_;
};

class KmdRunner final : public Runner {
 public:
  KmdRunner(MeasureStream& stream, Kernel kernel, const CostMatrix& C, KmdOptions opt)
      : stream_(stream), kernel_(kernel), C_(C), opt_(opt), s_(init_kmd_state(static_cast<Eigen::Index>(C.size()))) {}

  bool step() override {
    auto d = stream_.sample();
    if (!d) return false;
    kmd_step(s_, kernel_, d->measure.weights(), C_, opt_);
    return true;
  }
  long k() const override { return s_.primal.k; }
  Vector estimate() const override { return s_.primal.r_avg; }
  double last_eta() const override { return s_.primal.last_eta; }
  std::optional<std::size_t> history_size() const override { return s_.history_size(); }
  json save() const override {
    using namespace detail;
    return json{{"kernel", {{"family", to_string(kernel_.family)}, {"param", kernel_.param}, {"r_sq", kernel_.r_sq}}},
                {"betas", encode_vectors(s_.betas)},
                {"samples", encode_vectors(s_.samples)},
                {"primal", encode_primal(s_.primal)}};
  }
  void load(const json& j) override {
    using namespace detail;
    s_.betas = decode_vectors(j.at("betas"));
    s_.samples = decode_vectors(j.at("samples"));
    s_.primal = decode_primal(j.at("primal"));
    if (s_.betas.size() != s_.samples.size()) throw PreconditionError("checkpoint: betas/samples length mismatch");
  }

 private:
  MeasureStream& stream_;
  Kernel kernel_;
  const CostMatrix& C_;
  KmdOptions opt_;
  KmdState s_;
};

class LinearKmdRunner final : public Runner {
 public:
  LinearKmdRunner(MeasureStream& stream, const CostMatrix& C, KmdOptions opt)
      : stream_(stream), C_(C), opt_(opt), s_(init_linear_kmd_state(static_cast<Eigen::Index>(C.size()))) {}

  bool step() override {
    auto d = stream_.sample();
    if (!d) return false;
    linear_kmd_step(s_, d->measure.weights(), C_, opt_);
    return true;
  }
  long k() const override { return s_.primal.k; }
  Vector estimate() const override { return s_.primal.r_avg; }
  double last_eta() const override { return s_.primal.last_eta; }
  json save() const override {
    return json{{"theta", detail::encode_matrix(s_.theta)}, {"primal", detail::encode_primal(s_.primal)}};
  }
  void load(const json& j) override {
    s_.theta = detail::decode_matrix(j.at("theta"));
    s_.primal = detail::decode_primal(j.at("primal"));
  }

 private:
  MeasureStream& stream_;
  const CostMatrix& C_;
  KmdOptions opt_;
  LinearKmdState s_;
};

class BaselineRunner final : public Runner {
 public:
  BaselineRunner(MeasureStream& stream, const CostMatrix& C, BaselineConfig cfg)
      : stream_(stream), C_(C), cfg_(cfg), s_(BaselineState::uniform(static_cast<Eigen::Index>(C.size()))) {
    cfg_.validate(C.size());
  }

  bool step() override {
    auto d = stream_.sample();
    if (!d) return false;
    baseline_step(s_, d->measure.weights(), C_, cfg_);
    return true;
  }
  long k() const override { return s_.k; }
  Vector estimate() const override { return s_.r_avg; }
  double last_eta() const override { return s_.last_eta; }
  long unstable_steps() const { return s_.unstable_steps; }
  json save() const override {
    using namespace detail;
    return json{{"log_r", encode_vector(s_.log_r)}, {"r", encode_vector(s_.r)},
                {"r_avg", encode_vector(s_.r_avg)}, {"k", s_.k},
                {"unstable_steps", s_.unstable_steps}, {"last_eta", s_.last_eta}};
  }
  void load(const json& j) override {
    using namespace detail;
    s_.log_r = decode_vector(j.at("log_r"));
    s_.r = decode_vector(j.at("r"));
    s_.r_avg = decode_vector(j.at("r_avg"));
    s_.k = j.at("k").get<long>();
    s_.unstable_steps = j.at("unstable_steps").get<long>();
    s_.last_eta = j.at("last_eta").get<double>();
  }

 private:
  MeasureStream& stream_;
  const CostMatrix& C_;
  BaselineConfig cfg_;
  BaselineState s_;
};

// ---------------------------------------------------------------------------

/// Seed resolution: explicit flag, then the config, then BARY_SEED.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const RunConfig& cfg) {
  if (flag) return *flag;
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("BARY_SEED")) {
    try {
      std::size_t used = 0;
      const std::string s(env);
      const auto v = std::stoull(s, &used);
      if (used == s.size() && !s.empty() && s[0] != '-') return v;
    } catch (const std::exception&) {
    }
    throw PreconditionError(std::string("BARY_SEED is not a non-negative integer: '") + env + "'");
  }
  throw PreconditionError("no seed: pass --seed, set \"seed\" in the config, or export BARY_SEED");
}

/// Atomic write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PreconditionError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw PreconditionError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// One configured run: data, runner, stream, report and trace, with
/// checkpoint/restore of all of it.
class Experiment {
 public:
  Experiment(RunConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed), data_(build_data(cfg_, seed_)) {
    if (data_.source) stream_.emplace(*data_.source, seed_);
    const auto& m = cfg_.method;
    if (m.name == "finite_md") {
      runner_ = std::make_unique<FiniteRunner>(FiniteProblem(data_.rows, data_.weights, data_.C), cfg_.N, seed_,
                                               m.eta_scale, exact_options(cfg_), cfg_.eval.gap);
    } else if (m.name == "kmd") {
      runner_ = std::make_unique<KmdRunner>(*stream_, kernel_from(m), data_.C, kmd_options(cfg_));
    } else if (m.name == "linear_kmd") {
      runner_ = std::make_unique<LinearKmdRunner>(*stream_, data_.C, kmd_options(cfg_));
    } else {
      runner_ = std::make_unique<BaselineRunner>(*stream_, data_.C, baseline_config(cfg_));
    }
    report_.method = m.name;
    report_.seed = seed_;
    report_.config_hash = config_hash(cfg_);
  }

  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  /// Rebuilds the run from a checkpoint written by `checkpoint()`.
  static std::unique_ptr<Experiment> restore(const json& ck) {
    if (!ck.is_object() || ck.value("version", 0) != kCheckpointVersion)
      throw PreconditionError("checkpoint: unsupported or missing version");
    auto e = std::make_unique<Experiment>(parse_config(ck.at("config")), ck.at("seed").get<std::uint64_t>());
    e->runner_->load(ck.at("state"));
    if (e->stream_) {
      const auto& st = ck.at("stream");
      e->stream_->restore({st.at("rng").get<std::uint64_t>(), st.at("position").get<std::uint64_t>()});
    }
    e->elapsed_base_ = ck.at("elapsed_ns").get<std::int64_t>();
    e->exhausted_ = ck.value("exhausted", false);
    for (const auto& r : ck.at("report"))
      e->report_.rows.push_back({r.at("samples_processed").get<long>(), detail::decode_opt(r.at("W2_to_truth")),
                                 detail::decode_opt(r.at("gap_surrogate")), r.at("wall_ns").get<std::int64_t>()});
    for (const auto& t : ck.at("trace")) {
      TraceRow row{t.at("iteration").get<long>(), t.at("eta").get<double>(), detail::decode_opt(t.at("gap")),
                   t.at("elapsed_ns").get<std::int64_t>(), std::nullopt};
      if (!t.at("history_size").is_null()) row.history_size = t.at("history_size").get<std::size_t>();
      e->trace_.push_back(row);
    }
    return e;
  }

  static std::unique_ptr<Experiment> restore_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("cannot open checkpoint " + path.string());
    json ck;
    try {
      ck = json::parse(in);
    } catch (const json::exception& e) {
      throw PreconditionError("checkpoint " + path.string() + ": " + e.what());
    }
    return restore(ck);
  }

  json checkpoint() const {
    json report = json::array(), trace = json::array();
    for (const auto& r : report_.rows)
      report.push_back({{"samples_processed", r.samples_processed},
                        {"W2_to_truth", detail::encode_opt(r.w2_to_truth)},
                        {"gap_surrogate", detail::encode_opt(r.gap_surrogate)},
                        {"wall_ns", r.wall_ns}});
    for (const auto& t : trace_)
      trace.push_back({{"iteration", t.iteration},
                       {"eta", t.eta},
                       {"gap", detail::encode_opt(t.gap)},
                       {"elapsed_ns", t.elapsed_ns},
                       {"history_size", t.history_size ? json(*t.history_size) : json(nullptr)}});
    json ck{{"version", kCheckpointVersion},
            {"config", cfg_},
            {"seed", seed_},
            {"method", cfg_.method.name},
            {"k", runner_->k()},
            {"elapsed_ns", elapsed_ns()},
            {"exhausted", exhausted_},
            {"state", runner_->save()},
            {"report", std::move(report)},
            {"trace", std::move(trace)}};
    ck["stream"] = stream_ ? json{{"rng", stream_->state().rng}, {"position", stream_->state().position}} : json(nullptr);
    return ck;
  }

  void write_checkpoint(const std::filesystem::path& path) const { write_file_atomic(path, checkpoint().dump()); }

  /// Steps until k = min(until, N) or the stream ends. Scores every
  /// `eval.score_every` samples and at the horizon; checkpoints every
  /// `checkpoint_every` samples when a checkpoint path is configured.
  void run(long until = -1) {
    const long target = (until < 0) ? cfg_.N : std::min(until, cfg_.N);
    while (!exhausted_ && runner_->k() < target) {
      if (!runner_->step()) {
        exhausted_ = true;
        break;
      }
      const long k = runner_->k();
      if ((cfg_.eval.score_every > 0 && k % cfg_.eval.score_every == 0) || k == cfg_.N) record();
      if (!cfg_.output.checkpoint.empty() && cfg_.checkpoint_every > 0 && k % cfg_.checkpoint_every == 0)
        write_checkpoint(cfg_.output.checkpoint);
    }
    if (exhausted_ && (report_.rows.empty() || report_.rows.back().samples_processed != runner_->k())) record();
  }

  /// Writes the report, trace and final checkpoint to the configured paths.
  void write_outputs() const {
    if (!cfg_.output.report.empty()) {
      std::ostringstream os;
      report_.write_csv(os);
      write_file_atomic(cfg_.output.report, os.str());
    }
    if (!cfg_.output.trace.empty()) {
      std::ostringstream os;
      write_trace_csv(os, trace_, cfg_.method.name == "kmd");
      write_file_atomic(cfg_.output.trace, os.str());
    }
    if (!cfg_.output.checkpoint.empty()) write_checkpoint(cfg_.output.checkpoint);
  }

  ReportRow score(const Vector& est) const {
    ReportRow row;
    row.samples_processed = runner_->k();
    if (data_.truth && data_.grid) row.w2_to_truth = bary::score(est, *data_.truth, *data_.grid);
    if (!data_.holdout.empty()) row.gap_surrogate = gap_surrogate(est, data_.holdout, data_.C, exact_options(cfg_));
    row.wall_ns = elapsed_ns();
    return row;
  }

  const RunConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  const ExperimentData& data() const { return data_; }
  const ExperimentReport& report() const { return report_; }
  const Trace& trace() const { return trace_; }
  const Runner& runner() const { return *runner_; }
  Vector estimate() const { return runner_->estimate(); }
  long k() const { return runner_->k(); }
  bool exhausted() const { return exhausted_; }
  bool done() const { return exhausted_ || runner_->k() >= cfg_.N; }

 private:
  std::int64_t elapsed_ns() const { return elapsed_base_ + clock_.elapsed_ns(); }

  void record() {
    report_.rows.push_back(score(runner_->estimate()));
    trace_.push_back({runner_->k(), runner_->last_eta(), runner_->exact_gap(), elapsed_ns(), runner_->history_size()});
  }

  RunConfig cfg_;
  std::uint64_t seed_;
  ExperimentData data_;
  std::optional<MeasureStream> stream_;
  std::unique_ptr<Runner> runner_;
  ExperimentReport report_;
  Trace trace_;
  Stopwatch clock_;
  std::int64_t elapsed_base_ = 0;
  bool exhausted_ = false;
};

}  // namespace bary
