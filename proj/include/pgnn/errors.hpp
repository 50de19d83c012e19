#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace pgnn {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes do not line up (matmul, layer wiring, cache reuse).
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// A constructed value violates its invariants (bad mask, self-loop, ...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// An iterative routine failed to meet its tolerance, or a computation
// produced non-finite values. Carries the best value available at the
// point of failure (last estimate, residual mass) when one exists.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
  NumericError(const std::string& msg, double value) : Error(msg), value_(value) {}

  std::optional<double> value() const { return value_; }

 private:
  std::optional<double> value_;
};

// Training or recursion blew up. Divergence is a recorded outcome, not a
// bug: sweeps catch this and emit a marker row instead of failing.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, std::size_t step) : Error(msg), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Config text could not be parsed or validated. Carries the offending
// line number (1-based, 0 when not tied to a line) and key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& msg, std::size_t line, std::string key)
      : Error(msg), line_(line), key_(std::move(key)) {}

  std::size_t line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

// Filesystem-level failure (unwritable output dir, truncated checkpoint).
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace pgnn
