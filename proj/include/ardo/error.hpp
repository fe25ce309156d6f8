#pragma once

#include <stdexcept>
#include <string>

namespace ardo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss term, gradient or network output became non-finite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Training aborted because a quantity became non-finite. Carries the
/// 1-based epoch at which it happened (0 when raised outside the loop).
class DivergedError : public NumericalError {
 public:
  DivergedError(const std::string& what, long epoch)
      : NumericalError(what), epoch_(epoch) {}

  long epoch() const noexcept { return epoch_; }

 private:
  long epoch_;
};

}  // namespace ardo
