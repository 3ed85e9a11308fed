#pragma once

#include <stdexcept>
#include <string>

namespace adaptivity {

// Factorization failed even after the jitter retry.
struct NotPsdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative solver stopped at max_iter; carries the best bound reached.
struct DidNotConvergeError : std::runtime_error {
  double best_value;
  DidNotConvergeError(const std::string& what, double best)
      : std::runtime_error(what), best_value(best) {}
};

// Every stage of a mixed-design trajectory was discarded.
struct EmptyOutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Core identification exceeded its provable iteration bound.
struct IterationCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A generated vector left the unit ball.
struct NormViolationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnvironmentExhaustedError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Bad configuration file; `field` is the offending path, e.g. "env.type".
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(const std::string& field_path, const std::string& what)
      : std::runtime_error(field_path + ": " + what), field(field_path) {}
};

}  // namespace adaptivity
