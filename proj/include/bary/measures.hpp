#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "bary/errors.hpp"
#include "bary/rng.hpp"

namespace bary {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kSimplexTol = 1e-12;
/// Floor applied to generated measures before normalization.
inline constexpr double kMassFloor = 1e-12;

/// Ordered support points on a segment.
class Grid1D {
 public:
  Grid1D(std::vector<double> points, double lo, double hi)
      : points_(std::move(points)), lo_(lo), hi_(hi) {
    if (points_.size() < 2) throw PreconditionError("Grid1D: need at least 2 points");
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (!(points_[i] > points_[i - 1]))
        throw PreconditionError("Grid1D: points must be strictly increasing");
    if (!(lo_ <= points_.front() && points_.back() <= hi_))
      throw PreconditionError("Grid1D: points outside bounds");
  }

  /// n equispaced points on [lo, hi], endpoints included.
  static Grid1D uniform(double lo, double hi, std::size_t n) {
    if (n < 2 || !(hi > lo)) throw PreconditionError("Grid1D::uniform: need n >= 2 and hi > lo");
    std::vector<double> pts(n);
    const double h = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) pts[i] = lo + h * static_cast<double>(i);
    pts.back() = hi;
    return Grid1D(std::move(pts), lo, hi);
  }

  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  const std::vector<double>& points() const { return points_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  bool operator==(const Grid1D&) const = default;

 private:
  std::vector<double> points_;
  double lo_;
  double hi_;
};

/// A point of the probability simplex, optionally tied to a 1-D grid.
class DiscreteMeasure {
 public:
  explicit DiscreteMeasure(Vector weights, std::shared_ptr<const Grid1D> support = nullptr)
      : weights_(std::move(weights)), support_(std::move(support)) {
    if (weights_.size() == 0) throw PreconditionError("DiscreteMeasure: empty weight vector");
    if (support_ && static_cast<std::size_t>(weights_.size()) != support_->size())
      throw PreconditionError("DiscreteMeasure: weight count does not match support size");
    if (!(weights_.array() >= 0.0).all() || !weights_.allFinite())
      throw PreconditionError("DiscreteMeasure: negative or non-finite weight");
    if (std::abs(weights_.sum() - 1.0) > kSimplexTol)
      throw PreconditionError("DiscreteMeasure: weights do not sum to 1");
  }

  std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  const Vector& weights() const { return weights_; }
  double operator[](std::size_t i) const { return weights_[static_cast<Eigen::Index>(i)]; }
  const std::shared_ptr<const Grid1D>& support() const { return support_; }

 private:
  Vector weights_;
  std::shared_ptr<const Grid1D> support_;
};

/// Scales a non-negative vector onto the simplex.
inline DiscreteMeasure normalize(const Vector& raw, std::shared_ptr<const Grid1D> support = nullptr) {
  if (raw.size() == 0) throw PreconditionError("normalize: empty vector");
  if (!raw.allFinite()) throw PreconditionError("normalize: non-finite entry");
  if ((raw.array() < 0.0).any()) throw PreconditionError("normalize: negative entry");
  const double total = raw.sum();
  if (!(total > 0.0)) throw PreconditionError("normalize: all entries are zero");
  Vector w = raw / total;
  // Division leaves the sum within a few ulps of 1; fold the residue into
  // the largest entry so the result is exact to rounding.
  Eigen::Index imax = 0;
  w.maxCoeff(&imax);
  w[imax] += 1.0 - w.sum();
  return DiscreteMeasure(std::move(w), std::move(support));
}

/// Normalizes after raising every entry to at least `floor`.
inline DiscreteMeasure normalize_floored(const Vector& raw, std::shared_ptr<const Grid1D> support = nullptr,
                                         double floor = kMassFloor) {
  if ((raw.array() < 0.0).any()) throw PreconditionError("normalize_floored: negative entry");
  return normalize(raw.cwiseMax(floor), std::move(support));
}

/// Floor-clamps a simplex vector and renormalizes it; used where a strictly
/// positive measure is required (entropic solvers).
inline Vector floor_clamped(const Vector& w, double floor = kMassFloor) {
  Vector out = w.cwiseMax(floor);
  return out / out.sum();
}

/// Pointwise Gaussian density on the grid, floor-clamped and normalized.
inline DiscreteMeasure discretize_gaussian(double mu, double sigma, const std::shared_ptr<const Grid1D>& grid) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw PreconditionError("discretize_gaussian: sigma must be positive");
  if (!std::isfinite(mu)) throw PreconditionError("discretize_gaussian: mu must be finite");
  const std::size_t n = grid->size();
  Vector raw(static_cast<Eigen::Index>(n));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (*grid)[i] - mu;
    raw[static_cast<Eigen::Index>(i)] = std::exp(-d * d * inv);
  }
  // Far from the grid every density can underflow; the floor keeps a valid
  // (uniform) fallback in that case.
  return normalize_floored(raw, grid);
}

/// Law over Gaussian parameters: mean ~ N(mean_mu, mean_var), sd ~ Exp(sd_rate).
struct GaussianParamLaw {
  double mean_mu = 1.0;
  double mean_var = 4.0;
  double sd_rate = 0.5;

  void validate() const {
    if (!(mean_var > 0.0)) throw PreconditionError("GaussianParamLaw: mean variance must be positive");
    if (!(sd_rate > 0.0)) throw PreconditionError("GaussianParamLaw: sd rate must be positive");
  }
  bool operator==(const GaussianParamLaw&) const = default;
};

// ---------------------------------------------------------------------------
// File formats

/// Measure corpus: one measure per line, optional `# grid: lo hi n` header.
struct Corpus {
  std::optional<Grid1D> grid;
  std::vector<Vector> rows;
};

namespace detail {

inline std::vector<double> parse_csv_numbers(const std::string& line, const std::string& where) {
  std::vector<double> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = cell.find_last_not_of(" \t\r");
    const std::string tok = cell.substr(b, e - b + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw PreconditionError(where + ": cannot parse number '" + tok + "'");
    }
    if (used != tok.size()) throw PreconditionError(where + ": cannot parse number '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("load_corpus: cannot open " + path.string());
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> width;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "grid:") {
        double lo = 0, hi = 0;
        std::size_t n = 0;
        if (!(hs >> lo >> hi >> n)) throw PreconditionError(where + ": malformed grid header");
        corpus.grid = Grid1D::uniform(lo, hi, n);
      }
      continue;
    }
    auto vals = detail::parse_csv_numbers(line, where);
    if (width && vals.size() != *width) throw PreconditionError(where + ": row length differs from previous rows");
    width = vals.size();
    if (corpus.grid && vals.size() != corpus.grid->size())
      throw PreconditionError(where + ": row length does not match grid header");
    Vector raw = Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    try {
      corpus.rows.push_back(normalize(raw).weights());
    } catch (const PreconditionError& e) {
      throw PreconditionError(where + ": " + e.what());
    }
  }
  return corpus;
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  if (corpus.grid)
    out << "# grid: " << detail::format_double(corpus.grid->lo()) << ' ' << detail::format_double(corpus.grid->hi())
        << ' ' << corpus.grid->size() << '\n';
  for (const auto& row : corpus.rows) {
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << detail::format_double(row[i]);
    }
    out << '\n';
  }
}

/// Grayscale image stored as side*side comma/newline separated intensities
/// in [0, 255], row-major. Returns the normalized pixel mass.
inline DiscreteMeasure load_image_measure(const std::filesystem::path& path, std::size_t expected_side) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("load_image_measure: cannot open " + path.string());
  std::vector<double> px;
  std::string line;
  while (std::getline(in, line)) {
    auto vals = detail::parse_csv_numbers(line, path.string());
    px.insert(px.end(), vals.begin(), vals.end());
  }
  const std::size_t want = expected_side * expected_side;
  if (px.size() != want)
    throw PreconditionError("load_image_measure: " + path.string() + " has " + std::to_string(px.size()) +
                            " pixels, expected " + std::to_string(want));
  for (double v : px)
    if (!(v >= 0.0 && v <= 255.0))
      throw PreconditionError("load_image_measure: " + path.string() + " has intensity outside [0, 255]");
  Vector raw = Eigen::Map<Vector>(px.data(), static_cast<Eigen::Index>(px.size()));
  if (!(raw.sum() > 0.0)) throw PreconditionError("load_image_measure: " + path.string() + " is all black");
  return normalize(raw);
}

// ---------------------------------------------------------------------------
// Streams

struct FiniteSource {
  std::vector<Vector> measures;
  Vector weights;  // law of the index
};

struct GaussianSource {
  GaussianParamLaw law;
  std::shared_ptr<const Grid1D> grid;
};

struct CorpusSource {
  std::vector<Vector> rows;
  std::shared_ptr<const Grid1D> grid;  // may be null
  bool strict = true;                  // false: wrap around at the end
};

/// One draw from a stream. `index` is set for finite and corpus sources,
/// `mean`/`sd` for the generative Gaussian source.
struct Sample {
  DiscreteMeasure measure;
  std::optional<std::size_t> index;
  double mean = 0.0;
  double sd = 0.0;
};

/// Single-owner source of i.i.d. measures. Equal configuration and seed give
/// identical sequences; `state()`/`restore()` allow exact resumption.
class MeasureStream {
 public:
  using Source = std::variant<FiniteSource, GaussianSource, CorpusSource>;

  struct State {
    std::uint64_t rng = 0;
    std::uint64_t position = 0;
  };

  MeasureStream(Source source, std::uint64_t seed) : source_(std::move(source)), rng_(seed) { validate(); }

  /// Next draw, or nullopt when a strict corpus is exhausted.
  std::optional<Sample> sample() {
    return std::visit([this](auto& src) { return draw(src); }, source_);
  }

  std::size_t dimension() const {
    return std::visit(
        [](const auto& src) -> std::size_t {
          using T = std::decay_t<decltype(src)>;
          if constexpr (std::is_same_v<T, FiniteSource>) return static_cast<std::size_t>(src.measures.front().size());
          else if constexpr (std::is_same_v<T, GaussianSource>) return src.grid->size();
          else return static_cast<std::size_t>(src.rows.front().size());
        },
        source_);
  }

  const Source& source() const { return source_; }
  State state() const { return {rng_.state(), position_}; }
  void restore(const State& s) {
    rng_.set_state(s.rng);
    position_ = s.position;
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& src) {
          using T = std::decay_t<decltype(src)>;
          if constexpr (std::is_same_v<T, FiniteSource>) {
            if (src.measures.empty()) throw PreconditionError("FiniteSource: no measures");
            if (static_cast<std::size_t>(src.weights.size()) != src.measures.size())
              throw PreconditionError("FiniteSource: weight count differs from measure count");
            DiscreteMeasure check(src.weights);
            for (const auto& m : src.measures) {
              if (m.size() != src.measures.front().size())
                throw PreconditionError("FiniteSource: measures have mixed support sizes");
              DiscreteMeasure check_m(m);
            }
          } else if constexpr (std::is_same_v<T, GaussianSource>) {
            src.law.validate();
            if (!src.grid) throw PreconditionError("GaussianSource: missing grid");
          } else {
            if (src.rows.empty()) throw PreconditionError("CorpusSource: empty corpus");
            for (const auto& m : src.rows)
              if (m.size() != src.rows.front().size())
                throw PreconditionError("CorpusSource: measures have mixed support sizes");
          }
        },
        source_);
  }

  std::optional<Sample> draw(const FiniteSource& src) {
    const std::size_t t = rng_.categorical(std::span<const double>(src.weights.data(), src.weights.size()));
    ++position_;
    return Sample{DiscreteMeasure(src.measures[t]), t};
  }

  std::optional<Sample> draw(const GaussianSource& src) {
    const double mu = rng_.normal(src.law.mean_mu, std::sqrt(src.law.mean_var));
    const double sd = rng_.exponential(src.law.sd_rate);
    ++position_;
    // A zero draw is measure-zero but representable; fall back to the floor.
    return Sample{discretize_gaussian(mu, std::max(sd, 1e-150), src.grid), std::nullopt, mu, sd};
  }

  std::optional<Sample> draw(const CorpusSource& src) {
    if (position_ >= src.rows.size()) {
      if (src.strict) return std::nullopt;
    }
    const std::size_t i = static_cast<std::size_t>(position_ % src.rows.size());
    ++position_;
    return Sample{DiscreteMeasure(src.rows[i], src.grid), i};
  }

  Source source_;
  Rng rng_;
  std::uint64_t position_ = 0;
};

}  // namespace bary
