#pragma once

#include <stdexcept>
#include <string>

namespace pechukas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, violated preconditions, invalid configs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Eigensolver did not converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Degenerate spectrum where a non-degenerate one is required.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Two gas particles with nonzero coupling occupy the same position.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, int m, int n, double lambda)
      : Error(what), m_(m), n_(n), lambda_(lambda) {}
  int first() const { return m_; }
  int second() const { return n_; }
  double lambda() const { return lambda_; }

 private:
  int m_, n_;
  double lambda_;
};

/// Adaptive step fell below the configured minimum, or the state blew up.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double lambda, int m = -1, int n = -1)
      : Error(what), lambda_(lambda), m_(m), n_(n) {}
  double lambda() const { return lambda_; }
  int first() const { return m_; }
  int second() const { return n_; }

 private:
  double lambda_;
  int m_, n_;
};

/// Kinetic step larger than the stability bound allows.
class CflError : public ValidationError {
 public:
  CflError(const std::string& what, double admissible) : ValidationError(what), admissible_(admissible) {}
  double admissible() const { return admissible_; }

 private:
  double admissible_;
};

}  // namespace pechukas
