#pragma once

#include <stdexcept>
#include <string>

namespace evcal {

/// Malformed input files (events, tracks, configs). Carries line numbers
/// where the parser knows them.
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A documented precondition of an operation was violated (bad domain,
/// insufficient data, degenerate geometry).
class PreconditionError : public std::runtime_error {
public:
  explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The nonlinear refinement failed to make progress.
class ConvergenceError : public std::runtime_error {
public:
  explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace evcal
