#pragma once

#include <stdexcept>
#include <string>

namespace graphfair {

// Error taxonomy shared by the library and the CLI. Each class maps to a
// stable process exit code so scripted runs can branch on the failure kind.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

// Bad config key, bad flag combination, unusable command line.
struct ConfigError : Error {
  using Error::Error;
  int exit_code() const override { return 2; }
};

// Malformed input file. Message carries the file and line when known.
struct ParseError : Error {
  using Error::Error;
  int exit_code() const override { return 3; }
};

// Structurally invalid data (asymmetric matrix, label gaps, shape mismatch).
struct ValidationError : Error {
  using Error::Error;
  int exit_code() const override { return 4; }
};

// Requested split/batch sizes cannot be populated from the given graph.
struct SizingError : Error {
  using Error::Error;
  int exit_code() const override { return 5; }
};

// Metric undefined on this input (e.g. no inter-group pairs exist).
struct MetricError : Error {
  using Error::Error;
  int exit_code() const override { return 6; }
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
  using Error::Error;
  int exit_code() const override { return 7; }
};

}  // namespace graphfair
