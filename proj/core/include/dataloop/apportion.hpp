#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dataloop {

/// Largest-remainder apportionment of `total` units over real weights.
///
/// Every bucket receives floor(total * w_i / sum(w)) and the leftover units go
/// to the largest fractional remainders, ties to the lower index. The result
/// sums to `total` and each bucket is within 1 of its real-valued share.
/// Weights must be non-negative with a positive sum (or `total` must be 0).
std::vector<std::int64_t> largest_remainder(std::int64_t total, std::span<const double> weights);

/// Same rule for integer weights, computed in exact integer arithmetic so
/// shares like 30% of 160,000 land on 48,000 without rounding noise.
std::vector<std::int64_t> largest_remainder_exact(std::int64_t total,
                                                  std::span<const std::int64_t> weights);

}  // namespace dataloop
