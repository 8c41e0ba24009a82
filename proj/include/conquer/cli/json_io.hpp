#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "conquer/eval.hpp"
#include "conquer/iqe.hpp"
#include "conquer/mining.hpp"
#include "conquer/ot.hpp"
#include "conquer/ranking.hpp"
#include "json.hpp"

namespace conquer::cli {

// Matrix interchange: {"shape": [rows, cols], "values": [row-major reals]}
// plus optional metadata keys that readers ignore.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json similarity_to_json(const SimilarityMatrix& s);
SimilarityMatrix similarity_from_json(const nlohmann::json& j);

nlohmann::json plan_to_json(const TransportPlan& plan, const Eigen::MatrixXd& cost);

nlohmann::json partition_to_json(const PairPartition& p);
nlohmann::json negatives_to_json(const NegativeSet& n);

// Ranking: {"query_id": str, "entries": [{"index": int, "score": number}]}.
// A rankings file holds either one ranking object or a list of them.
nlohmann::json ranking_to_json(const RankedList& r);
RankedList ranking_from_json(const nlohmann::json& j);
std::vector<RankedList> rankings_from_json(const nlohmann::json& j);

// Relevance: {query_id: [gallery_index, ...]}.
nlohmann::json relevance_to_json(const RelevanceMap& r);
RelevanceMap relevance_from_json(const nlohmann::json& j);

nlohmann::json trace_to_json(const IqeTrace& t);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; identical values give identical bytes.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace conquer::cli
