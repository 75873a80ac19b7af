#include "isostat/isotonic.hpp"

#include <algorithm>
#include <cmath>

#include "isostat/core.hpp"

namespace isostat {

void WeightedVector::validate() const {
  if (values.empty()) throw InvalidInput("empty weighted vector");
  if (values.size() != weights.size())
    throw InvalidInput("values and weights differ in length");
  for (double g : values)
    if (!std::isfinite(g)) throw InvalidInput("non-finite value");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw InvalidInput("weights must be positive and finite");
}

BlockSolution isotonic_regression(const WeightedVector& v) {
  v.validate();
  const std::size_t k = v.size();

  struct Block {
    std::size_t first;
    double weighted_sum;  // sum of w_i * g_i over the block
    double weight;
    double mean;
  };
  std::vector<Block> stack;
  stack.reserve(k);

  for (std::size_t i = 0; i < k; ++i) {
    Block b{i, v.weights[i] * v.values[i], v.weights[i], v.values[i]};
    while (!stack.empty() && stack.back().mean > b.mean) {
      b.first = stack.back().first;
      b.weighted_sum += stack.back().weighted_sum;
      b.weight += stack.back().weight;
      b.mean = b.weighted_sum / b.weight;
      stack.pop_back();
    }
    stack.push_back(b);
  }

  BlockSolution out;
  out.fitted.resize(k);
  out.blocks.reserve(stack.size());
  for (std::size_t b = 0; b < stack.size(); ++b) {
    const std::size_t first = stack[b].first;
    const std::size_t last = b + 1 < stack.size() ? stack[b + 1].first - 1 : k - 1;
    out.blocks.push_back({first, last, stack[b].mean, stack[b].weight});
    for (std::size_t i = first; i <= last; ++i) out.fitted[i] = stack[b].mean;
  }
  return out;
}

BlockSolution antitonic_regression(const WeightedVector& v) {
  v.validate();
  const std::size_t k = v.size();
  WeightedVector rev;
  rev.values.assign(v.values.rbegin(), v.values.rend());
  rev.weights.assign(v.weights.rbegin(), v.weights.rend());
  BlockSolution iso = isotonic_regression(rev);

  BlockSolution out;
  out.fitted.assign(iso.fitted.rbegin(), iso.fitted.rend());
  out.blocks.reserve(iso.blocks.size());
  for (auto it = iso.blocks.rbegin(); it != iso.blocks.rend(); ++it)
    out.blocks.push_back({k - 1 - it->last, k - 1 - it->first, it->value, it->weight});
  return out;
}

}  // namespace isostat
