#include "conquer/mining.hpp"

#include <algorithm>

#include "conquer/error.hpp"

namespace conquer {

PairPartition partition_pairs(const SimilarityMatrix& s, PartitionThresholds thresholds) {
  if (s.values.rows() != s.values.cols()) {
    fail(Errc::NonSquareMatrix, "pair partition needs a square similarity matrix, got " +
                                    std::to_string(s.values.rows()) + "x" +
                                    std::to_string(s.values.cols()));
  }
  if (!(thresholds.delta_lo < thresholds.delta_hi)) {
    fail(Errc::InvalidThresholds, "delta_lo must be strictly below delta_hi");
  }
  PairPartition p;
  p.batch_size = static_cast<std::size_t>(s.values.rows());
  p.thresholds = thresholds;
  for (std::size_t i = 0; i < p.batch_size; ++i) {
    const double d = s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    if (d >= thresholds.delta_hi) {
      p.clean.push_back(i);
    } else if (d <= thresholds.delta_lo) {
      p.uncertain.push_back(i);
    } else {
      p.refinable.push_back(i);
    }
  }
  return p;
}

NegativeSet mine_complementary_negatives(const SimilarityMatrix& s,
                                         const PairPartition& partition,
                                         std::size_t per_row) {
  if (per_row == 0) fail(Errc::InvalidArgument, "per_row must be positive");
  const auto rows = static_cast<std::size_t>(s.values.rows());
  const auto cols = static_cast<std::size_t>(s.values.cols());
  if (partition.batch_size != rows) {
    fail(Errc::PartitionMismatch, "partition covers " + std::to_string(partition.batch_size) +
                                      " pairs but the matrix has " + std::to_string(rows) +
                                      " rows");
  }

  NegativeSet out;
  std::vector<std::size_t> candidates;
  for (const std::size_t i : partition.refinable) {
    if (i >= rows) fail(Errc::PartitionMismatch, "refinable index out of range");
    const auto row = s.values.row(static_cast<Eigen::Index>(i));
    candidates.clear();
    for (std::size_t j = 0; j < cols; ++j) {
      if (j != i) candidates.push_back(j);
    }
    const std::size_t take = std::min(per_row, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), [&](std::size_t a, std::size_t b) {
                        const double sa = row(static_cast<Eigen::Index>(a));
                        const double sb = row(static_cast<Eigen::Index>(b));
                        if (sa != sb) return sa > sb;
                        return a < b;
                      });
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t j = candidates[k];
      out.entries.push_back({i, j, row(static_cast<Eigen::Index>(j))});
    }
  }
  return out;
}

}  // namespace conquer
