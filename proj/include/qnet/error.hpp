#pragma once

#include <stdexcept>
#include <string>

namespace qnet {

// Base for every error raised by the toolkit. Domain errors (bad routing,
// exhausted budgets, violated preconditions) derive from this directly;
// InvalidArgument marks caller mistakes that the CLI reports as usage errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed network description (bad dimensions, rates, partitions, routing rows).
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidSpec {
 public:
  using InvalidSpec::InvalidSpec;
};

class NegativeRate : public InvalidSpec {
 public:
  using InvalidSpec::InvalidSpec;
};

class NonTransientRouting : public Error {
 public:
  NonTransientRouting() : Error("routing matrix not transient") {}
};

class EmptyConfiguration : public Error {
 public:
  EmptyConfiguration() : Error("empty configuration has no head") {}
};

class UnsupportedReduction : public Error {
 public:
  using Error::Error;
};

class UnknownFixture : public Error {
 public:
  explicit UnknownFixture(const std::string& name)
      : Error("unknown fixture: " + name) {}
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class NotSubconfiguration : public Error {
 public:
  NotSubconfiguration() : Error("lower state is not a subconfiguration of the upper state") {}
};

class PreconditionViolation : public Error {
 public:
  using Error::Error;
};

class BracketFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace qnet
