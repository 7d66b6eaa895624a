#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "bary/measures.hpp"

namespace bary {

/// One row of a runner trace. `gap` is empty when not evaluated at this row,
/// `history_size` is only reported by the kernel runners.
struct TraceRow {
  long iteration = 0;
  double eta = 0.0;
  std::optional<double> gap;
  std::int64_t elapsed_ns = 0;
  std::optional<std::size_t> history_size;
};

using Trace = std::vector<TraceRow>;

inline void write_trace_csv(std::ostream& out, const Trace& trace, bool with_history = false) {
  out << "iteration,eta,gap,elapsed_ns";
  if (with_history) out << ",history_size";
  out << '\n';
  for (const auto& row : trace) {
    out << row.iteration << ',' << detail::format_double(row.eta) << ',';
    if (row.gap) out << detail::format_double(*row.gap);
    out << ',' << row.elapsed_ns;
    if (with_history) {
      out << ',';
      if (row.history_size) out << *row.history_size;
    }
    out << '\n';
  }
}

/// Monotonic stopwatch used for the elapsed_ns column.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  std::int64_t elapsed_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace bary
