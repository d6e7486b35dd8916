#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gbc_chroma {

enum class ErrorCode {
  MissingHeader,
  InvalidHeader,
  NonNumericCell,
  InconsistentArity,
  TooFewAttributes,
  EmptyTable,
  SpecMismatch,
  TooFewRows,
  TooFewPoints,
  TooFewSamples,
  DegenerateCloud,
  DegenerateRange,
  LengthMismatch,
  InvalidArgument,
  IoFailure,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingHeader: return "MissingHeader";
    case ErrorCode::InvalidHeader: return "InvalidHeader";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::InconsistentArity: return "InconsistentArity";
    case ErrorCode::TooFewAttributes: return "TooFewAttributes";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception. Row and column are
// 1-based file positions and only meaningful for CSV ingestion errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::size_t row = 0, std::size_t col = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        row_(row),
        col_(col) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

  // I/O failures are environmental; everything else is a bad input.
  bool is_io() const noexcept { return code_ == ErrorCode::IoFailure; }

 private:
  ErrorCode code_;
  std::size_t row_;
  std::size_t col_;
};

}  // namespace gbc_chroma
