#pragma once

#include <stdexcept>
#include <string>

namespace rdopt {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CSV rows, JSON documents,
// out-of-contract arguments).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A constrained allocation has no feasible operating-point assignment.
// `constraint()` names the binding threshold so the operator knows which
// one to relax.
class InfeasibleError : public Error {
 public:
  InfeasibleError(std::string constraint, const std::string& what)
      : Error(what), constraint_(std::move(constraint)) {}

  const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

}  // namespace rdopt
