#include "conquer/error.hpp"

namespace conquer {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::IoFailure: return "IoFailure";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::TrailingData: return "TrailingData";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::EmptyBundle: return "EmptyBundle";
    case Errc::EmptyTokens: return "EmptyTokens";
    case Errc::NonSquareMatrix: return "NonSquareMatrix";
    case Errc::InvalidThresholds: return "InvalidThresholds";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::PartitionMismatch: return "PartitionMismatch";
    case Errc::MissingWeight: return "MissingWeight";
    case Errc::NonFiniteCost: return "NonFiniteCost";
    case Errc::InvalidMarginal: return "InvalidMarginal";
    case Errc::DegenerateMarginal: return "DegenerateMarginal";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case Errc::EmptyRanking: return "EmptyRanking";
    case Errc::EmptyAnchorSet: return "EmptyAnchorSet";
    case Errc::OracleFailure: return "OracleFailure";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::GalleryMismatch: return "GalleryMismatch";
    case Errc::EmptyGallery: return "EmptyGallery";
    case Errc::MissingRelevance: return "MissingRelevance";
    case Errc::EmptyRelevanceSet: return "EmptyRelevanceSet";
    case Errc::ConfigError: return "ConfigError";
    case Errc::MalformedInput: return "MalformedInput";
  }
  return "Unknown";
}

}  // namespace conquer
