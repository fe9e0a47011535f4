#pragma once

#include <stdexcept>
#include <string>

namespace s2c {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when a value is outside its admissible range (non-positive
/// targets, missing sampling period, wrong time domain, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class NearSingularError : public Error {
 public:
  NearSingularError(const std::string& what, double condition_number)
      : Error(what), condition_number_(condition_number) {}
  double condition_number() const { return condition_number_; }

 private:
  double condition_number_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class PipelineError : public Error {
 public:
  using Error::Error;
};

}  // namespace s2c
