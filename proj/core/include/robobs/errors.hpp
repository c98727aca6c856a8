#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace robobs {

/// Failure categories surfaced by the library. Each maps to a named
/// precondition or numerical failure of an operation.
enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kSingularAtFrequency,
  kAlgebraicLoop,
  kUnstableSystem,
  kImaginaryAxisEigenvalue,
  kNoStabilizingSolution,
  kInfeasibleAtGammaMax,
  kRegularityFailure,
  kRankDeficientNominal,
  kSingularRatio,
  kGridMismatch,
  kInfeasibleFit,
  kNonPositiveEnvelope,
  kNonInvertibleScale,
  kUnstableObserver,
  kLineAboveNyquist,
  kRankDeficientExcitation,
  kLengthMismatch,
  kStageIncomplete,
  kHashMismatch,
  kSchema,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace robobs
