#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace musep {

enum class ErrorCode {
  // data ingestion / alignment
  MalformedCsv,
  NonMonotoneTimestamps,
  NonFiniteValue,
  DimensionMismatch,
  EmptyIntersection,
  SubjectMismatch,
  InvalidSpec,
  MalformedManifest,
  // ecg
  SignalTooShort,
  TooFewIntervals,
  NonPositiveInterval,
  GridMismatch,
  CoverageError,
  // nn
  InvalidConfig,
  ShapeMismatch,
  StaleCache,
  IoError,
  BadMagic,
  UnsupportedVersion,
  CorruptPayload,
  // objective
  LengthMismatch,
  Degenerate,
  // training / ensemble
  EmptyCorpus,
  LayoutMismatch,
  EmptySegment,
  EmptyEnsemble,
  MissingPrediction,
  NumericFailure,
  // config
  UnknownKey,
  MissingRequiredKey,
  TypeError,
  PathError,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-checkable code; the message holds subject/file context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace musep
