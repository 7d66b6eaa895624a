#pragma once

#include <stdexcept>
#include <string>

namespace bary {

/// Bad input or configuration: violated precondition, malformed file,
/// incompatible options. Maps to CLI exit code 1.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared inside an iteration. Carries a dump of the
/// offending state. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::string state_dump = {})
      : std::runtime_error(what), dump_(std::move(state_dump)) {}
  const std::string& state_dump() const { return dump_; }

 private:
  std::string dump_;
};

}  // namespace bary
