#include "robobs/errors.hpp"

namespace robobs {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kSingularAtFrequency: return "SingularAtFrequency";
    case ErrorKind::kAlgebraicLoop: return "AlgebraicLoop";
    case ErrorKind::kUnstableSystem: return "UnstableSystem";
    case ErrorKind::kImaginaryAxisEigenvalue: return "ImaginaryAxisEigenvalue";
    case ErrorKind::kNoStabilizingSolution: return "NoStabilizingSolution";
    case ErrorKind::kInfeasibleAtGammaMax: return "InfeasibleAtGammaMax";
    case ErrorKind::kRegularityFailure: return "RegularityFailure";
    case ErrorKind::kRankDeficientNominal: return "RankDeficientNominal";
    case ErrorKind::kSingularRatio: return "SingularRatio";
    case ErrorKind::kGridMismatch: return "GridMismatch";
    case ErrorKind::kInfeasibleFit: return "InfeasibleFit";
    case ErrorKind::kNonPositiveEnvelope: return "NonPositiveEnvelope";
    case ErrorKind::kNonInvertibleScale: return "NonInvertibleScale";
    case ErrorKind::kUnstableObserver: return "UnstableObserver";
    case ErrorKind::kLineAboveNyquist: return "LineAboveNyquist";
    case ErrorKind::kRankDeficientExcitation: return "RankDeficientExcitation";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kStageIncomplete: return "StageIncomplete";
    case ErrorKind::kHashMismatch: return "HashMismatch";
    case ErrorKind::kSchema: return "Schema";
  }
  return "Unknown";
}

}  // namespace robobs
