#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rbm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A force evaluation produced a non-finite value.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// The particle system is too small or malformed (e.g. N < 2).
class InvalidSystemError : public Error {
 public:
  using Error::Error;
};

/// A batch division is not an exact partition into equal batches of size >= 2.
class InvalidPartitionError : public Error {
 public:
  using Error::Error;
};

/// Configuration values are inconsistent or out of range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A step or level index lies outside the addressable range of a plan.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Two trajectories were compared pathwise without sharing their randomness.
class CouplingError : public Error {
 public:
  using Error::Error;
};

/// A regression could not be carried out on the given series.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Input exceeds a solver's size cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Inputs to an estimator fail validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A trajectory left the finite range. Carries the step at which it happened.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error("divergence at step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace rbm
