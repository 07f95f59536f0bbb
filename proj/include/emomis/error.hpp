#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace emomis {

enum class Errc {
  InvalidArgument,
  DuplicateId,
  UnknownLabel,
  MalformedRow,
  EmptyCorpus,
  DimMismatch,
  ParseError,
  MissingHeader,
  ShapeMismatch,
  EmptyTrainingSet,
  IoError,
  SchemaError,
  LengthMismatch,
  CodeOutOfRange,
  EmptyMatrix,
  LabelCountMismatch,
  SampleTooLarge,
  EmptyInput,
  RaggedTable,
  TooFewRaters,
  InsufficientAnnotators,
  EmptyAfterCleaning,
  TooFewPoints,
  DegenerateData,
  MissingEmbedding,
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::ParseError: return "ParseError";
    case Errc::MissingHeader: return "MissingHeader";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::IoError: return "IoError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::CodeOutOfRange: return "CodeOutOfRange";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::LabelCountMismatch: return "LabelCountMismatch";
    case Errc::SampleTooLarge: return "SampleTooLarge";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::RaggedTable: return "RaggedTable";
    case Errc::TooFewRaters: return "TooFewRaters";
    case Errc::InsufficientAnnotators: return "InsufficientAnnotators";
    case Errc::EmptyAfterCleaning: return "EmptyAfterCleaning";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::MissingEmbedding: return "MissingEmbedding";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this exception. `where`
/// carries a row or line number when the failure is tied to a file position.
class Error : public std::runtime_error {
 public:
  /// `unit` names what `where` counts: data rows, physical lines, or list indices.
  Error(Errc code, const std::string& detail, std::optional<std::size_t> where = std::nullopt,
        std::string_view unit = "row")
      : std::runtime_error(format(code, detail, where, unit)), code_(code), where_(where) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> where() const noexcept { return where_; }

 private:
  static std::string format(Errc code, const std::string& detail, std::optional<std::size_t> where,
                            std::string_view unit) {
    std::string msg(errc_name(code));
    if (where) msg += " at " + std::string(unit) + " " + std::to_string(*where);
    if (!detail.empty()) msg += ": " + detail;
    return msg;
  }

  Errc code_;
  std::optional<std::size_t> where_;
};

}  // namespace emomis
