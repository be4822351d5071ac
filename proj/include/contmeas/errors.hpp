#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace contmeas {

enum class ErrorKind {
  NonHermitianInput,
  DimensionMismatch,
  DomainError,
  NotPositiveSemidefinite,
  SyntaxError,
  ShapeError,
  UnknownScenario,
  InvalidParameters,
  BudgetExceeded,
  GridMiss,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonHermitianInput: return "NonHermitianInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::UnknownScenario: return "UnknownScenario";
    case ErrorKind::InvalidParameters: return "InvalidParameters";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::GridMiss: return "GridMiss";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace contmeas
