#include "conquer/eval.hpp"

#include "conquer/error.hpp"

namespace conquer {

namespace {

const std::set<std::size_t>& relevant_for(const RankedList& ranking,
                                          const RelevanceMap& relevance) {
  const auto it = relevance.find(ranking.query_id);
  if (it == relevance.end()) {
    fail(Errc::MissingRelevance, "no relevance entry for query '" + ranking.query_id + "'");
  }
  if (it->second.empty()) {
    fail(Errc::EmptyRelevanceSet, "query '" + ranking.query_id + "' has no relevant items");
  }
  for (const std::size_t idx : it->second) {
    if (idx >= ranking.entries.size()) {
      fail(Errc::IndexOutOfRange, "relevant index " + std::to_string(idx) + " for query '" +
                                      ranking.query_id + "' outside the ranked gallery");
    }
  }
  return it->second;
}

}  // namespace

RankedList rank_gallery(const Eigen::VectorXd& query_vec, const FeatureBundle& gallery,
                        std::string query_id) {
  if (gallery.items.empty()) fail(Errc::EmptyGallery, "gallery is empty");
  if (static_cast<std::size_t>(query_vec.size()) != gallery.dim) {
    fail(Errc::DimensionMismatch, "query has length " + std::to_string(query_vec.size()) +
                                      ", gallery dim is " + std::to_string(gallery.dim));
  }
  const double qn = query_vec.norm();
  if (!(qn >= kZeroNormThreshold)) fail(Errc::ZeroVector, "query vector has zero norm");
  Eigen::VectorXd scores(static_cast<Eigen::Index>(gallery.items.size()));
  for (std::size_t i = 0; i < gallery.items.size(); ++i) {
    const auto& g = gallery.items[i].global_vec;
    const double gn = g.norm();
    if (!(gn >= kZeroNormThreshold)) {
      fail(Errc::ZeroVector, "gallery item '" + gallery.items[i].id + "' has zero norm");
    }
    scores(static_cast<Eigen::Index>(i)) = query_vec.dot(g) / (qn * gn);
  }
  return make_ranking(std::move(query_id), scores);
}

RelevanceMap relevance_from_labels(const FeatureBundle& queries, const FeatureBundle& gallery) {
  RelevanceMap out;
  for (const Item& q : queries.items) {
    auto& rel = out[q.id];
    for (std::size_t g = 0; g < gallery.items.size(); ++g) {
      if (gallery.items[g].identity_label == q.identity_label) rel.insert(g);
    }
  }
  return out;
}

double rank_at_k(const std::vector<RankedList>& rankings, const RelevanceMap& relevance,
                 std::size_t k) {
  if (k == 0) fail(Errc::InvalidArgument, "k must be positive");
  if (rankings.empty()) fail(Errc::EmptyRanking, "no rankings to evaluate");
  std::size_t hits = 0;
  for (const RankedList& r : rankings) {
    const auto& rel = relevant_for(r, relevance);
    const std::size_t cut = std::min(k, r.entries.size());
    for (std::size_t i = 0; i < cut; ++i) {
      if (rel.count(r.entries[i].gallery_index) != 0) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double average_precision(const RankedList& ranking, const std::set<std::size_t>& relevant) {
  if (relevant.empty()) {
    fail(Errc::EmptyRelevanceSet, "query '" + ranking.query_id + "' has no relevant items");
  }
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < ranking.entries.size(); ++r) {
    if (relevant.count(ranking.entries[r].gallery_index) != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

double mean_average_precision(const std::vector<RankedList>& rankings,
                              const RelevanceMap& relevance) {
  if (rankings.empty()) fail(Errc::EmptyRanking, "no rankings to evaluate");
  double total = 0.0;
  for (const RankedList& r : rankings) {
    total += average_precision(r, relevant_for(r, relevance));
  }
  return total / static_cast<double>(rankings.size());
}

}  // namespace conquer
