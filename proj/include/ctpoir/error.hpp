#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctpoir {

enum class ErrorKind {
  Io,
  Parse,
  MissingTag,
  InconsistentSeries,
  UnsupportedTransferSyntax,
  HeaderMismatch,
  OutOfRange,
  DimMismatch,
  EmptyIntersection,
  SegmenterFailure,
  ValueOutOfRange,
  ScorerFailure,
  EmptyList,
  EmptyLung,
  ZeroVariance,
  ZeroGroundTruth,
  SingleClass,
  SpecViolation,
  InvalidArgument,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::MissingTag: return "MissingTag";
    case ErrorKind::InconsistentSeries: return "InconsistentSeries";
    case ErrorKind::UnsupportedTransferSyntax: return "UnsupportedTransferSyntax";
    case ErrorKind::HeaderMismatch: return "HeaderMismatch";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::SegmenterFailure: return "SegmenterFailure";
    case ErrorKind::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorKind::ScorerFailure: return "ScorerFailure";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::EmptyLung: return "EmptyLung";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::ZeroGroundTruth: return "ZeroGroundTruth";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::SpecViolation: return "SpecViolation";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// Errors caused by bad input files or arguments, as opposed to failures
// inside a pipeline stage. The CLI maps these to different exit codes.
inline bool is_input_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::Parse:
    case ErrorKind::MissingTag:
    case ErrorKind::InconsistentSeries:
    case ErrorKind::UnsupportedTransferSyntax:
    case ErrorKind::HeaderMismatch:
    case ErrorKind::ValueOutOfRange:
    case ErrorKind::SpecViolation:
    case ErrorKind::InvalidArgument:
    case ErrorKind::DimMismatch:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail, std::string stage = {})
      : std::runtime_error(format(kind, detail, stage)),
        kind_(kind),
        detail_(detail),
        stage_(std::move(stage)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::string& stage() const noexcept { return stage_; }

  // Same error, tagged with the pipeline stage it surfaced in.
  Error with_stage(std::string stage) const { return Error(kind_, detail_, std::move(stage)); }

 private:
  static std::string format(ErrorKind kind, const std::string& detail, const std::string& stage) {
    std::string out;
    if (!stage.empty()) out += "[" + stage + "] ";
    out += std::string(to_string(kind));
    if (!detail.empty()) out += ": " + detail;
    return out;
  }

  ErrorKind kind_;
  std::string detail_;
  std::string stage_;
};

}  // namespace ctpoir
