#pragma once

#include <stdexcept>
#include <string>

namespace stepdirect {

// Invalid arguments or violated preconditions. The CLI maps these to exit code 2.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or inconsistent input data (CSV ingestion, graph validation).
class ValidationError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Convergence failures and degenerate numerical states. The CLI maps these to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BracketError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonConvergence : public NumericError {
 public:
  using NumericError::NumericError;
};

class NotPositiveDefinite : public NumericError {
 public:
  using NumericError::NumericError;
};

class InfeasibleTruncation : public NumericError {
 public:
  using NumericError::NumericError;
};

class EmptySetError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateTarget : public NumericError {
 public:
  using NumericError::NumericError;
};

class SamplerStall : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace stepdirect
