#pragma once

#include <stdexcept>
#include <string>

namespace paralens {

enum class ErrorCode {
  ShapeMismatch,
  KindMismatch,
  InterfaceMismatch,
  NotADistribution,
  CyclicCircuit,
  DanglingWire,
  ParseError,
  ValidationError,
  BadMagic,
  CountMismatch,
  TruncatedFile,
  NumericError,
  ToleranceExceeded,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::InterfaceMismatch: return "InterfaceMismatch";
    case ErrorCode::NotADistribution: return "NotADistribution";
    case ErrorCode::CyclicCircuit: return "CyclicCircuit";
    case ErrorCode::DanglingWire: return "DanglingWire";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NumericError: return "NumericError";
    case ErrorCode::ToleranceExceeded: return "ToleranceExceeded";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace paralens
