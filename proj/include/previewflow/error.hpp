#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid grid dimensions or mismatched shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (wrong field kind, arity, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class DivisibilityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class UnpairedRunError : public Error {
 public:
  using Error::Error;
};

// Non-finite state during ODE integration.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Training loss became non-finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace pflow
