#pragma once

#include <cstddef>
#include <vector>

#include "conquer/features.hpp"

namespace conquer {

struct PartitionThresholds {
  double delta_hi = 0.7;
  double delta_lo = 0.3;
};

/// Split of the B matched pairs (the diagonal of a global similarity matrix)
/// into clean (S_ii >= delta_hi), uncertain (S_ii <= delta_lo) and refinable.
/// Each set is sorted ascending.
struct PairPartition {
  std::size_t batch_size = 0;
  std::vector<std::size_t> clean;
  std::vector<std::size_t> uncertain;
  std::vector<std::size_t> refinable;
  PartitionThresholds thresholds;
};

struct Negative {
  std::size_t row = 0;
  std::size_t col = 0;
  double similarity = 0.0;

  bool operator==(const Negative&) const = default;
};

struct NegativeSet {
  std::vector<Negative> entries;
};

inline constexpr std::size_t kDefaultNegativesPerRow = 4;

PairPartition partition_pairs(const SimilarityMatrix& s, PartitionThresholds thresholds);

/// Hardest off-diagonal entries of every refinable row, per_row at most.
/// Rows appear in ascending order; within a row, descending similarity with
/// ascending column index breaking ties.
NegativeSet mine_complementary_negatives(const SimilarityMatrix& s,
                                         const PairPartition& partition,
                                         std::size_t per_row = kDefaultNegativesPerRow);

}  // namespace conquer
