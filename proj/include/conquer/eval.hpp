#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "conquer/features.hpp"
#include "conquer/ranking.hpp"

namespace conquer {

/// Query id -> gallery indices that count as correct matches.
using RelevanceMap = std::map<std::string, std::set<std::size_t>>;

/// Full-gallery ranking by cosine similarity to the query.
RankedList rank_gallery(const Eigen::VectorXd& query_vec, const FeatureBundle& gallery,
                        std::string query_id = {});

/// Relevance from shared identity labels: query item i is relevant to every
/// gallery item with the same label. Query ids come from the query bundle.
RelevanceMap relevance_from_labels(const FeatureBundle& queries, const FeatureBundle& gallery);

/// Fraction of queries with at least one relevant item in their top k.
double rank_at_k(const std::vector<RankedList>& rankings, const RelevanceMap& relevance,
                 std::size_t k);

/// Mean over queries of AP = (1/|rel|) * sum over relevant hits at rank r of hits(r) / r.
double mean_average_precision(const std::vector<RankedList>& rankings,
                              const RelevanceMap& relevance);

double average_precision(const RankedList& ranking, const std::set<std::size_t>& relevant);

}  // namespace conquer
