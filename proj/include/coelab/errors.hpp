#pragma once

#include <stdexcept>
#include <string>

namespace coelab {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent model/query structure: bad cardinalities,
// unknown variable names, CPT columns that do not normalize, misuse of
// an operation's preconditions.  Maps to CLI exit code 2.
class ModelError : public Error {
 public:
  using Error::Error;
};

// Directed cycle found while validating a graph.
class CycleDetectedError : public ModelError {
 public:
  using ModelError::ModelError;
};

// The remaining errors describe well-formed inputs for which the requested
// quantity does not exist.  They map to CLI exit code 3.

// Normalization or conditioning hit total mass <= 1e-12.
class ZeroMassError : public Error {
 public:
  using Error::Error;
};

// A stratum has positive probability but one exposure arm is empty,
// so a needed conditional is undefined.
class PositivityViolationError : public Error {
 public:
  using Error::Error;
};

// Inputs are individually valid but mutually inconsistent (no joint
// distribution can produce them), or a constraint system is empty.
class InfeasibleDataError : public Error {
 public:
  using Error::Error;
};

// Instrument has (near-)zero first-stage effect; ratio estimands blow up.
class WeakInstrumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace coelab
