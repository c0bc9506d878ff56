#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace trigs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or parameter-range violation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The objective lacks a gradient or proximal map required by the caller.
class MissingCapability : public Error {
 public:
  using Error::Error;
};

// Integration aborted; carries the last accepted state.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double t, Eigen::VectorXd state)
      : Error(what), t_(t), state_(std::move(state)) {}

  double time() const { return t_; }
  const Eigen::VectorXd& last_state() const { return state_; }

 private:
  double t_;
  Eigen::VectorXd state_;
};

// Config parse/validation failure; line is 1-based, 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace trigs
