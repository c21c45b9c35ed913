#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ldrank {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative numerical routine failed to converge within its cap.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A matrix required to be (semi)definite has a disqualifying eigenvalue.
class NotPsd : public Error {
 public:
  using Error::Error;
};

/// Saddle-point analysis requested on a system without a negative mode.
class NotSaddle : public Error {
 public:
  using Error::Error;
};

/// Two systems expected to share preconditioner/noise covariance do not.
class MismatchedSystems : public Error {
 public:
  using Error::Error;
};

/// The simulated loss exceeded the divergence threshold or became non-finite.
/// Carries the partial loss series for diagnosis.
class DivergedError : public Error {
 public:
  DivergedError(long step, std::vector<double> partial_losses)
      : Error("simulation diverged at step " + std::to_string(step)),
        step_(step),
        partial_losses_(std::move(partial_losses)) {}

  long step() const { return step_; }
  const std::vector<double>& partial_losses() const { return partial_losses_; }

 private:
  long step_;
  std::vector<double> partial_losses_;
};

/// Invalid user-facing configuration (CLI / experiment configs).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ldrank
