#include "musep/error.hpp"

namespace musep {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::NonMonotoneTimestamps: return "NonMonotoneTimestamps";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::SubjectMismatch: return "SubjectMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::TooFewIntervals: return "TooFewIntervals";
    case ErrorCode::NonPositiveInterval: return "NonPositiveInterval";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::CoverageError: return "CoverageError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::NumericFailure: return "NumericFailure";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::MissingRequiredKey: return "MissingRequiredKey";
    case ErrorCode::TypeError: return "TypeError";
    case ErrorCode::PathError: return "PathError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace musep
