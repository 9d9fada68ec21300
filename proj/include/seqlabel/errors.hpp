#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seqlabel {

// Machine-readable error classes surfaced by the CLI.
enum class ErrorCode { Parse, Validate, Data, Numeric };

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string kind, const std::string& detail)
      : std::runtime_error(kind + ": " + detail), code_(code), kind_(std::move(kind)) {}

  ErrorCode code() const { return code_; }
  const std::string& kind() const { return kind_; }

 private:
  ErrorCode code_;
  std::string kind_;
};

#define SEQLABEL_DEFINE_ERROR(Name, Code)                                  \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& detail) : Error(Code, #Name, detail) {} \
  };

SEQLABEL_DEFINE_ERROR(ParseError, ErrorCode::Parse)
SEQLABEL_DEFINE_ERROR(StructuralError, ErrorCode::Validate)
SEQLABEL_DEFINE_ERROR(AssumptionViolation, ErrorCode::Validate)
SEQLABEL_DEFINE_ERROR(InvalidSpec, ErrorCode::Validate)
SEQLABEL_DEFINE_ERROR(InsufficientData, ErrorCode::Data)
SEQLABEL_DEFINE_ERROR(MissingEstimate, ErrorCode::Data)
SEQLABEL_DEFINE_ERROR(RankDeficient, ErrorCode::Numeric)
SEQLABEL_DEFINE_ERROR(SignInconsistency, ErrorCode::Numeric)
SEQLABEL_DEFINE_ERROR(SignAmbiguous, ErrorCode::Numeric)
SEQLABEL_DEFINE_ERROR(SizeExceeded, ErrorCode::Numeric)
SEQLABEL_DEFINE_ERROR(SingularSystem, ErrorCode::Numeric)
SEQLABEL_DEFINE_ERROR(MarginalMismatch, ErrorCode::Numeric)
SEQLABEL_DEFINE_ERROR(Diverged, ErrorCode::Numeric)
SEQLABEL_DEFINE_ERROR(FitFailed, ErrorCode::Numeric)

#undef SEQLABEL_DEFINE_ERROR

// Non-fatal conditions collected during fitting and inference.
struct Warning {
  std::string kind;  // ClampWarning, NotConverged, PriorSmoothed, ...
  std::string detail;
};

struct Diagnostics {
  std::vector<Warning> warnings;

  void warn(std::string kind, std::string detail) {
    warnings.push_back({std::move(kind), std::move(detail)});
  }
  bool has(std::string_view kind) const {
    for (const auto& w : warnings)
      if (w.kind == kind) return true;
    return false;
  }
  void append(const Diagnostics& other) {
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
  }
};

}  // namespace seqlabel
