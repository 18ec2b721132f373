#pragma once

#include <stdexcept>
#include <string>

namespace rmhd {

/// Invalid configuration, unknown option or rule. Maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Solver or discretization failure. Maps to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read or written. Maps to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or incompatible input file (restart). Maps to exit code 1.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation requested on the wrong model variant.
class ModelVariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// |B| too small for the parallel direction to be defined.
class DegenerateFieldError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A preconditioner block could not be factorized.
class SingularBlockError : public NumericalError {
 public:
  SingularBlockError(const std::string& block, const std::string& detail)
      : NumericalError("singular preconditioner block '" + block + "': " + detail), block_(block) {}
  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

}  // namespace rmhd
