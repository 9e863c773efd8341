#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sofa {

/// Malformed user input: rule text, packet records, flag combinations.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input error carrying the 1-based source line that caused it.
class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& message)
      : InputError("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A stored artifact is corrupt or internally inconsistent.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Instance generation exhausted its retry budget without reaching the
/// required zero-test margin. The message reports the parameter sets tried.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sofa
