#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace conquer {

enum class Errc {
  IoFailure,
  MalformedHeader,
  TruncatedFile,
  TrailingData,
  DimensionMismatch,
  DuplicateId,
  ZeroVector,
  EmptyBundle,
  EmptyTokens,
  NonSquareMatrix,
  InvalidThresholds,
  InvalidArgument,
  PartitionMismatch,
  MissingWeight,
  NonFiniteCost,
  InvalidMarginal,
  DegenerateMarginal,
  ShapeMismatch,
  IndexOutOfRange,
  NonFiniteInput,
  NonFiniteEvaluation,
  EmptyRanking,
  EmptyAnchorSet,
  OracleFailure,
  LengthMismatch,
  GalleryMismatch,
  EmptyGallery,
  MissingRelevance,
  EmptyRelevanceSet,
  ConfigError,
  MalformedInput,
};

std::string_view errc_name(Errc code) noexcept;

// Every library failure is reported through this type; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace conquer
