#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dataloop/error.hpp"

namespace dataloop {

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(const std::vector<double>& values);

/// Pearson correlation of the average ranks. Needs equal lengths of at least
/// two and some spread in both rank vectors.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

/// Percentile bootstrap interval for the mean.
///
/// Each resample draws n indices with SeededRng(seed).index(n), in order. Its
/// mean is v0 + (sum of (v - v0) left to right) / n with v0 = values[0], so a
/// constant input gives exactly that constant. The sorted
/// resample means are read at positions q*(resamples-1) for q = (1-level)/2
/// and (1+level)/2, interpolating linearly between neighbours.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values, int resamples, double level,
                                       std::uint64_t seed);

}  // namespace dataloop
