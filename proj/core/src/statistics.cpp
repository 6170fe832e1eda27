#include "dataloop/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dataloop/rng.hpp"

namespace dataloop {

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw LengthMismatch("spearman_rho needs equal-length inputs");
  if (a.size() < 2) throw DegenerateInput("spearman_rho needs at least two points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  // Both rank vectors have the same mean, (n+1)/2.
  const double mean = (static_cast<double>(a.size()) + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateInput("spearman_rho input has no rank variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, int resamples, double level,
                                       std::uint64_t seed) {
  if (values.empty()) throw DegenerateInput("bootstrap_ci needs at least one value");
  if (resamples < 1) throw DegenerateInput("bootstrap_ci needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw DegenerateInput("bootstrap_ci level must lie in (0, 1)");

  SeededRng rng(seed);
  const std::size_t n = values.size();
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[rng.index(n)] - values[0];
    m = values[0] + sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());

  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return means[lo] + (means[hi] - means[lo]) * frac;
  };
  return {at((1.0 - level) / 2.0), at((1.0 + level) / 2.0)};
}

}  // namespace dataloop
