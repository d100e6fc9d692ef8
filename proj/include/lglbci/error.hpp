#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lgl {

enum class ErrorCode {
  MalformedHeader,
  DimensionMismatch,
  NonFiniteValue,
  IoFailure,
  VersionMismatch,
  ChecksumMismatch,
  InvalidBand,
  UnstableDesign,
  GaborViolation,
  WindowTooLong,
  DegenerateInput,
  ConvergenceFailure,
  NotPositiveDefinite,
  RankDeficientWeight,
  KarcherDivergence,
  MissingForwardCache,
  ShapeMismatch,
  LabelOutOfRange,
  NonFiniteLoss,
  InsufficientData,
  SchemaMismatch,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as an Error carrying a code, so
// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lgl
