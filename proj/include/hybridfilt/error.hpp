#pragma once

#include <stdexcept>
#include <string>

namespace hybridfilt {

// Invalid input, configuration or precondition. The CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure on otherwise valid input. The CLI maps it to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rate, drift or link function returned a non-finite value.
class ModelEvaluationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// An observed transition has zero reference rate but positive candidate rate,
// so the two path measures are not equivalent.
class SingularLikelihoodError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Transitions observed with zero occupation: the rate estimate is undefined.
class SingularStatisticsError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StepTooLargeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace hybridfilt
