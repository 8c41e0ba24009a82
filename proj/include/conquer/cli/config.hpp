#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "conquer/iqe.hpp"
#include "conquer/losses.hpp"
#include "conquer/mining.hpp"
#include "conquer/ot.hpp"
#include "json.hpp"

namespace conquer::cli {

/// Every tunable of every command in one flat document. Serialized with all
/// keys present; parsing rejects unknown keys and out-of-range values.
struct PipelineConfig {
  PartitionThresholds thresholds;
  std::size_t negatives_per_row = kDefaultNegativesPerRow;
  SinkhornOptions sinkhorn;
  CostKind cost_kind = CostKind::CosineDistance;
  LossWeights loss;
  IqeConfig iqe;
  std::uint64_t seed = 0;

  void validate() const;

  /// Overrides the retrieval hyperparameters with the published settings:
  /// alpha 0.5, beta 0.1, K 5, psi 0.90, xi 0.85, tau 0.85, eta 0.5, gamma 0.6.
  void apply_paper_defaults();

  nlohmann::json to_json() const;
  /// Starts from `base` and overrides the keys present in `j`.
  static PipelineConfig from_json(const nlohmann::json& j, const PipelineConfig& base);
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig from_file(const std::filesystem::path& path, const PipelineConfig& base);
  static PipelineConfig from_file(const std::filesystem::path& path);
};

}  // namespace conquer::cli
