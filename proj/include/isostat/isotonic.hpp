#pragma once

#include <cstddef>
#include <vector>

namespace isostat {

/// Values with positive weights, the input of a monotone regression.
struct WeightedVector {
  std::vector<double> values;
  std::vector<double> weights;

  std::size_t size() const noexcept { return values.size(); }
  void validate() const;
};

/// A maximal run of indices [first, last] pooled to a common fitted value.
/// `value` is the weighted mean of the pooled inputs, `weight` their total
/// weight. Adjacent blocks may carry equal values: ties are not pooled.
struct PooledBlock {
  std::size_t first = 0;
  std::size_t last = 0;
  double value = 0.0;
  double weight = 0.0;
};

/// Monotone least-squares fit together with its level-set structure.
struct BlockSolution {
  std::vector<double> fitted;
  std::vector<PooledBlock> blocks;
};

/// Weighted least-squares projection onto non-decreasing vectors.
///
/// Single-pass pool-adjacent-violators: maintains a stack of blocks and
/// merges while the trailing pair violates the order. O(k), idempotent,
/// and weighted-mean preserving. Only strict violations are pooled.
BlockSolution isotonic_regression(const WeightedVector& v);

/// Projection onto non-increasing vectors: the isotonic regression of the
/// reversed vector, reversed back (block indices remapped accordingly).
BlockSolution antitonic_regression(const WeightedVector& v);

}  // namespace isostat
