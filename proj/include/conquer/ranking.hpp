#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace conquer {

struct RankEntry {
  std::size_t gallery_index = 0;
  double score = 0.0;

  bool operator==(const RankEntry&) const = default;
};

/// Gallery entries ordered by descending score, ties by ascending index.
struct RankedList {
  std::string query_id;
  std::vector<RankEntry> entries;

  bool operator==(const RankedList&) const = default;

  const RankEntry& top() const { return entries.front(); }
};

/// Ranks every gallery index by its score.
RankedList make_ranking(std::string query_id, const Eigen::VectorXd& scores);

/// Strict ordering used by every ranking in the library.
inline bool ranks_before(const RankEntry& a, const RankEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.gallery_index < b.gallery_index;
}

}  // namespace conquer
