#include "conquer/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "conquer/error.hpp"

namespace conquer {

RankedList make_ranking(std::string query_id, const Eigen::VectorXd& scores) {
  RankedList list;
  list.query_id = std::move(query_id);
  list.entries.reserve(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores(i))) {
      fail(Errc::NonFiniteInput, "NaN score at gallery index " + std::to_string(i));
    }
    list.entries.push_back({static_cast<std::size_t>(i), scores(i)});
  }
  std::sort(list.entries.begin(), list.entries.end(), ranks_before);
  return list;
}

}  // namespace conquer
