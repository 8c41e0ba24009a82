#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "conquer/cli/config.hpp"
#include "conquer/features.hpp"
#include "json.hpp"

namespace conquer::cli {

// Each command reads its inputs, writes its outputs and returns a summary
// object. The summary never contains wall-clock or path-dependent state, so
// repeated runs print identical bytes.

struct SynthOptions {
  std::size_t identities = 50;
  std::size_t tokens_per_item = 4;
  std::size_t dim = 16;
  double noise = 0.1;
};

struct SynthBundles {
  FeatureBundle images;
  FeatureBundle texts;
};

/// Paired image/text bundles: identity i draws a latent global vector and
/// latent tokens from N(0, I); both modalities observe them with independent
/// N(0, noise^2) perturbations. Item i of each bundle carries label i.
SynthBundles synthesize(std::uint64_t seed, const SynthOptions& opts);

nlohmann::json cmd_synth(const PipelineConfig& cfg, const SynthOptions& opts,
                         const std::filesystem::path& images_out,
                         const std::filesystem::path& texts_out);

/// Loads a bundle, unit-normalizing it unless `raw` is set.
FeatureBundle load_for_cli(const std::filesystem::path& path, bool raw);

struct SimOptions {
  bool local = false;
  std::size_t image_item = 0;
  std::size_t text_item = 0;
  bool raw = false;
};

nlohmann::json cmd_sim(const PipelineConfig& cfg, const std::filesystem::path& images,
                       const std::filesystem::path& texts, const SimOptions& opts,
                       const std::filesystem::path& out);

nlohmann::json cmd_mine(const PipelineConfig& cfg, const std::filesystem::path& sim,
                        const std::filesystem::path& out);

struct OtInput {
  /// Either a cost matrix file ...
  std::optional<std::filesystem::path> cost;
  /// ... or a token pair drawn from two bundles.
  std::optional<std::filesystem::path> images;
  std::optional<std::filesystem::path> texts;
  std::size_t image_item = 0;
  std::size_t text_item = 0;
  /// d x d weight matrix for the bilinear cost.
  std::optional<std::filesystem::path> weight;
};

nlohmann::json cmd_ot(const PipelineConfig& cfg, const OtInput& in,
                      const std::filesystem::path& out);

/// Composite objective over a matched batch (item i of each bundle is pair i).
nlohmann::json cmd_loss(const PipelineConfig& cfg, const std::filesystem::path& images,
                        const std::filesystem::path& texts,
                        const std::optional<std::filesystem::path>& weight,
                        const std::filesystem::path& out);

/// Ranks the image gallery for every text query; optionally writes the
/// label-derived relevance map alongside.
nlohmann::json cmd_rank(const PipelineConfig& cfg, const std::filesystem::path& images,
                        const std::filesystem::path& texts, const std::filesystem::path& out,
                        const std::optional<std::filesystem::path>& relevance_out);

struct OracleChoice {
  std::string kind = "mock";  // "mock" or "http"
  std::optional<std::filesystem::path> fixture;
  std::optional<std::string> url;
};

// IQE scenario file:
//   { "gallery": [id, ...],
//     "queries": [ {"id", "text", "similarities": [..]} ],
//     "enhanced_similarities": { text: [..] } }
// The last map stands in for the text encoder on rewritten queries.
nlohmann::json cmd_iqe(const PipelineConfig& cfg, const std::filesystem::path& scenario,
                       const OracleChoice& oracle, const std::filesystem::path& out);

nlohmann::json cmd_eval(const PipelineConfig& cfg, const std::filesystem::path& rankings,
                        const std::filesystem::path& relevance,
                        const std::optional<std::filesystem::path>& out);

}  // namespace conquer::cli
