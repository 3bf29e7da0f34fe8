#pragma once

#include <stdexcept>
#include <string>

namespace vpb {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Config problems map to exit code 1, numerical ones to 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ConstraintViolation : public ConfigError {
 public:
  ConstraintViolation(std::string which)
      : ConfigError("constraint violated: " + which), which_(std::move(which)) {}
  const std::string& which() const { return which_; }

 private:
  std::string which_;
};

class BadExponents : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DegenerateGradient : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvexityViolated : public NumericalError {
 public:
  ConvexityViolated(double margin)
      : NumericalError("convexity violated, margin " + std::to_string(margin)), margin_(margin) {}
  double margin() const { return margin_; }

 private:
  double margin_;
};

class SingularPoint : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class GridTooCoarse : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SolverDiverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OutsideDomain : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class LeftDomain : public NumericalError {
 public:
  explicit LeftDomain(double t_exit)
      : NumericalError("trajectory left the domain at t=" + std::to_string(t_exit)), t_exit_(t_exit) {}
  double t_exit() const { return t_exit_; }

 private:
  double t_exit_;
};

class NearGrazing : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotConverged : public NumericalError {
 public:
  NotConverged(int iterations, double residual)
      : NumericalError("not converged after " + std::to_string(iterations) +
                       " iterations, residual " + std::to_string(residual)),
        iterations_(iterations),
        residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

class WrongSide : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NegativeValue : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonPositiveValues : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class GridMismatch : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace vpb
