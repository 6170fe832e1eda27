#include "dataloop/apportion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dataloop {

__extension__ typedef __int128 wide_int;
namespace {

// Hands out `leftover` units to the buckets with the largest remainders.
// `remainder_greater(a, b)` orders buckets by remainder, descending.
template <typename Greater>
void distribute(std::vector<std::int64_t>& counts, std::int64_t leftover, Greater remainder_greater) {
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), remainder_greater);
  for (std::int64_t i = 0; i < leftover; ++i) {
    ++counts[order[static_cast<std::size_t>(i) % order.size()]];
  }
}

}  // namespace

std::vector<std::int64_t> largest_remainder(std::int64_t total, std::span<const double> weights) {
  if (total < 0) throw std::invalid_argument("largest_remainder: negative total");
  std::vector<std::int64_t> counts(weights.size(), 0);
  if (total == 0 || weights.empty()) {
    if (total != 0) throw std::invalid_argument("largest_remainder: no buckets");
    return counts;
  }
  long double sum = 0;
  for (const double w : weights) {
    if (!(w >= 0) || !std::isfinite(w)) throw std::invalid_argument("largest_remainder: bad weight");
    sum += w;
  }
  if (sum <= 0) throw std::invalid_argument("largest_remainder: weights sum to zero");

  std::vector<long double> remainders(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const long double ideal = static_cast<long double>(total) * weights[i] / sum;
    const long double floor = std::floor(ideal);
    counts[i] = static_cast<std::int64_t>(floor);
    remainders[i] = ideal - floor;
    assigned += counts[i];
  }
  distribute(counts, total - assigned,
             [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  return counts;
}

std::vector<std::int64_t> largest_remainder_exact(std::int64_t total,
                                                  std::span<const std::int64_t> weights) {
  if (total < 0) throw std::invalid_argument("largest_remainder_exact: negative total");
  std::vector<std::int64_t> counts(weights.size(), 0);
  wide_int sum = 0;
  for (const auto w : weights) {
    if (w < 0) throw std::invalid_argument("largest_remainder_exact: negative weight");
    sum += w;
  }
  if (total == 0) return counts;
  if (sum == 0) throw std::invalid_argument("largest_remainder_exact: weights sum to zero");

  // ideal_i = total * w_i / sum = quotient_i + remainder_i / sum
  std::vector<wide_int> remainders(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const wide_int scaled = static_cast<wide_int>(total) * weights[i];
    counts[i] = static_cast<std::int64_t>(scaled / sum);
    remainders[i] = scaled % sum;
    assigned += counts[i];
  }
  distribute(counts, total - assigned,
             [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  return counts;
}

}  // namespace dataloop
