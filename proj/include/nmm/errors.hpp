#pragma once

#include <stdexcept>
#include <string>

namespace nmm {

/// Malformed graph: cycle, duplicate edge, context vertex with parents, ...
class InvalidGraph : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input file.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base for numerical / model failures (CLI exit code 2).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFixable : public ModelError {
 public:
  using ModelError::ModelError;
};

class PartitionFailure : public ModelError {
 public:
  using ModelError::ModelError;
};

/// Parameters imply a negative (or, at positive counts, zero) probability.
class Infeasible : public ModelError {
 public:
  using ModelError::ModelError;
};

class DivisionByZero : public ModelError {
 public:
  using ModelError::ModelError;
};

class ZeroCounts : public ModelError {
 public:
  using ModelError::ModelError;
};

class RejectionExhausted : public ModelError {
 public:
  using ModelError::ModelError;
};

/// Census counts deviate from the expected headline integers (CLI exit code 3).
class CensusMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmm
