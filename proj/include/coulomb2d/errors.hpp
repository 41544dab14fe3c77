#pragma once

#include <stdexcept>
#include <string>

namespace coulomb2d {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The logarithmic kernel was evaluated on the diagonal, or at zero frequency.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// An operation's documented precondition does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A point lies outside the grid an operation needs it on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// The Markov chain produced a non-finite energy or otherwise broke.
class SamplerError : public Error {
 public:
  using Error::Error;
};

/// A statistical estimator cannot report (too few frames, ESS below floor).
class StatisticsError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A required input file does not exist.
class MissingFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace coulomb2d
