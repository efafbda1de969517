#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (bad fraction, index out of range, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Violation {
  std::optional<std::size_t> step;
  std::string message;
  bool operator==(const Violation&) const = default;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<Violation> violations)
      : Error(what), violations_(std::move(violations)) {}
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

/// A scripted backend was asked for a prompt it has no entry for.
class ReplayMissError : public BackendError {
 public:
  using BackendError::BackendError;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// The event timeline ran out of agents and resampling is disabled.
class HorizonError : public Error {
 public:
  using Error::Error;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t iteration)
      : Error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

class ClassificationError : public Error {
 public:
  ClassificationError(const std::string& what, std::size_t batch)
      : Error("judge batch " + std::to_string(batch) + ": " + what), batch_(batch) {}
  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
};

}  // namespace mfsim
