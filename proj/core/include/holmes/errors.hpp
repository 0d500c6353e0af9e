#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace holmes {

/// Invalid configuration or parameters supplied by the caller.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or Inf appeared in a simulated field.
class NumericalFault : public std::runtime_error {
 public:
  NumericalFault(int step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// Structurally invalid value (cyclic genome, malformed file, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model could not be fitted (rank-deficient data, empty set, ...).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input is degenerate for the requested computation (all points identical, zero matrix, ...).
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk state is inconsistent.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Directory does not contain a run.
class NoRunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace holmes
