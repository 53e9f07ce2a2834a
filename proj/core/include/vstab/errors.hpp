#pragma once

#include <stdexcept>
#include <string>

namespace vstab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A quantity left the domain where the model or a formula is valid.
class NumericError : public Error {
  public:
    using Error::Error;
};

/// An iterative method failed to converge.
class ConvergenceError : public Error {
  public:
    using Error::Error;
};

/// A file or configuration could not be parsed or validated.
class ParseError : public Error {
  public:
    using Error::Error;
};

// --- grid_model ---

class SingularElimination : public NumericError {
  public:
    using NumericError::NumericError;
};

class ZeroBaseVoltage : public NumericError {
  public:
    using NumericError::NumericError;
};

/// Bus voltage magnitude fell below the floor inside a constant-power current
/// or exciter evaluation; the constant-power model is leaving its valid region.
class VoltageCollapseGuard : public NumericError {
  public:
    using NumericError::NumericError;
};

// --- regularizer ---

class ComplexSpectrum : public NumericError {
  public:
    using NumericError::NumericError;
};

class DegenerateSpectrum : public NumericError {
  public:
    using NumericError::NumericError;
};

class NearSingular : public NumericError {
  public:
    using NumericError::NumericError;
};

class Overflow : public NumericError {
  public:
    using NumericError::NumericError;
};

// --- anchor_solver ---

class NoSingularContact : public Error {
  public:
    using Error::Error;
};

class NoConvergence : public ConvergenceError {
  public:
    using ConvergenceError::ConvergenceError;
};

class NotASaddle : public Error {
  public:
    using Error::Error;
};

// --- manifold_margin ---

class NoUnstableDirection : public Error {
  public:
    using Error::Error;
};

class MultipleUnstable : public Error {
  public:
    using Error::Error;
};

class DegenerateSEP : public NumericError {
  public:
    using NumericError::NumericError;
};

// --- simulator ---

class AlgebraicNoConvergence : public ConvergenceError {
  public:
    using ConvergenceError::ConvergenceError;
};

class InvalidInitialCondition : public Error {
  public:
    using Error::Error;
};

class BracketInvalid : public Error {
  public:
    using Error::Error;
};

}  // namespace vstab
