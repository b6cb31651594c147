#pragma once

#include <stdexcept>
#include <string>

namespace eitopt {

/// Configuration or input validation failure (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base class for failures inside the numerical pipeline (CLI exit code 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class MeshError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SolverError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace eitopt
