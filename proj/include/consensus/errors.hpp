#ifndef CONSENSUS_ERRORS_HPP_
#define CONSENSUS_ERRORS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace consensus {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates the invariant of a domain type (row sums, finiteness, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Non-positive entry in a weight vector.
class InvalidWeight : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A schedule could not produce a value at time t.
class ScheduleError : public Error {
 public:
  ScheduleError(std::int64_t t, const std::string& what)
      : Error("schedule failed at t=" + std::to_string(t) + ": " + what), t_(t) {}
  std::int64_t t() const { return t_; }

 private:
  std::int64_t t_;
};

/// A custom noise table was queried beyond its last row.
class ExhaustedTable : public ScheduleError {
 public:
  using ScheduleError::ScheduleError;
};

/// Declared derivative bounds of a learning function disagree with sampling.
class InconsistentDeclaration : public Error {
 public:
  using Error::Error;
};

class InsufficientSample : public Error {
 public:
  using Error::Error;
};

/// Input lacks the structure an operation requires (e.g. not rank one, not symmetric).
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Scenario JSON does not match the schema. `pointer()` is a JSON pointer to the offending node.
class ParseError : public Error {
 public:
  ParseError(std::string pointer, std::string message, std::string origin = {})
      : Error((origin.empty() ? "" : origin + ": ") + "at " + (pointer.empty() ? "/" : pointer) + ": " + message),
        pointer_(std::move(pointer)),
        message_(std::move(message)) {}
  const std::string& pointer() const { return pointer_; }
  const std::string& message() const { return message_; }

 private:
  std::string pointer_;
  std::string message_;
};

}  // namespace consensus

#endif  // CONSENSUS_ERRORS_HPP_
