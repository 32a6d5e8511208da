#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dado {

enum class ErrorKind {
  MissingFile,
  SchemaMismatch,
  NonFiniteValue,
  PoolExhausted,
  UnknownId,
  AlreadyConsumed,
  MissingAnnotation,
  InvalidCovariance,
  InvalidConfig,
  DimensionMismatch,
  NumericalDivergence,
  EmptyDraw,
  AcquisitionTooLarge,
  SizeMismatch,
  DegenerateInput,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::PoolExhausted: return "PoolExhausted";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::AlreadyConsumed: return "AlreadyConsumed";
    case ErrorKind::MissingAnnotation: return "MissingAnnotation";
    case ErrorKind::InvalidCovariance: return "InvalidCovariance";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NumericalDivergence: return "NumericalDivergence";
    case ErrorKind::EmptyDraw: return "EmptyDraw";
    case ErrorKind::AcquisitionTooLarge: return "AcquisitionTooLarge";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dado
