#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dataloop/rng.hpp"
#include "dataloop/statistics.hpp"

using namespace dataloop;

namespace {

// Textbook formula, valid only without ties.
double rho_no_ties(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace

TEST_SUITE("statistics") {
  TEST_CASE("average ranks") {
    CHECK(average_ranks({}).empty());
    CHECK(average_ranks({5.0}) == std::vector<double>{1.0});
    CHECK(average_ranks({3.0, 1.0, 2.0}) == std::vector<double>{3.0, 1.0, 2.0});
    CHECK(average_ranks({1.0, 2.0, 2.0, 3.0}) == std::vector<double>{1.0, 2.5, 2.5, 4.0});
    CHECK(average_ranks({7.0, 7.0, 7.0}) == std::vector<double>{2.0, 2.0, 2.0});
    CHECK(average_ranks({2.0, 1.0, 2.0, 1.0}) == std::vector<double>{3.5, 1.5, 3.5, 1.5});
  }

  TEST_CASE("rank sum is n(n+1)/2") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> v(1 + gen() % 40);
      for (auto& x : v) x = static_cast<double>(gen() % 6);
      const auto r = average_ranks(v);
      double sum = 0.0;
      for (double x : r) sum += x;
      const double n = static_cast<double>(v.size());
      CHECK(sum == n * (n + 1.0) / 2.0);
    }
  }

  TEST_CASE("spearman known values") {
    CHECK(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman_rho({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman_rho({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}) == doctest::Approx(0.8));
    // Monotone transforms do not change it.
    CHECK(spearman_rho({1, 2, 3, 4, 5}, {1, 8, 27, 64, 125}) == doctest::Approx(1.0));
  }

  TEST_CASE("spearman matches the no-tie formula") {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 2 + gen() % 30;
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<double>(i), b[i] = static_cast<double>(i);
      std::shuffle(a.begin(), a.end(), gen);
      std::shuffle(b.begin(), b.end(), gen);
      CHECK(spearman_rho(a, b) == doctest::Approx(rho_no_ties(a, b)).epsilon(1e-12));
      CHECK(spearman_rho(a, b) == doctest::Approx(spearman_rho(b, a)).epsilon(1e-15));
    }
  }

  TEST_CASE("spearman errors") {
    CHECK_THROWS_AS(spearman_rho({1, 2}, {1, 2, 3}), LengthMismatch);
    CHECK_THROWS_AS(spearman_rho({1}, {1}), DegenerateInput);
    CHECK_THROWS_AS(spearman_rho({}, {}), DegenerateInput);
    CHECK_THROWS_AS(spearman_rho({1, 1, 1}, {1, 2, 3}), DegenerateInput);
    CHECK_THROWS_AS(spearman_rho({1, 2, 3}, {4, 4, 4}), DegenerateInput);
  }

  TEST_CASE("bootstrap") {
    const auto constant = bootstrap_ci({0.3, 0.3, 0.3, 0.3}, 200, 0.95, 1);
    CHECK(constant.first == 0.3);
    CHECK(constant.second == 0.3);

    std::vector<double> v;
    for (int i = 0; i < 50; ++i) v.push_back(i % 2 == 0 ? 1.0 : 0.0);
    const auto ci = bootstrap_ci(v, 1000, 0.9, 42);
    CHECK(ci.first <= ci.second);
    CHECK(ci.first < 0.5);
    CHECK(ci.second > 0.5);
    CHECK(ci.first >= 0.0);
    CHECK(ci.second <= 1.0);
    CHECK(bootstrap_ci(v, 1000, 0.9, 42) == ci);
    const auto wide = bootstrap_ci(v, 1000, 0.99, 42);
    CHECK(wide.first <= ci.first);
    CHECK(wide.second >= ci.second);

    // One resample: both ends read the same mean.
    const auto one = bootstrap_ci({1.0, 2.0, 3.0}, 1, 0.5, 9);
    CHECK(one.first == one.second);
  }

  TEST_CASE("bootstrap follows the documented draw order") {
    const std::vector<double> v = {2.0, 5.0, 11.0};
    SeededRng rng(8);
    std::vector<double> means;
    for (int r = 0; r < 5; ++r) {
      double sum = 0.0;
      for (int i = 0; i < 3; ++i) sum += v[rng.index(3)] - v[0];
      means.push_back(v[0] + sum / 3.0);
    }
    std::sort(means.begin(), means.end());
    // level 0.5: q = 0.25 and 0.75 over 5 means hit positions 1 and 3 exactly.
    const auto ci = bootstrap_ci(v, 5, 0.5, 8);
    CHECK(ci.first == means[1]);
    CHECK(ci.second == means[3]);
  }

  TEST_CASE("bootstrap errors") {
    CHECK_THROWS_AS(bootstrap_ci({}, 10, 0.9, 1), DegenerateInput);
    CHECK_THROWS_AS(bootstrap_ci({1.0}, 0, 0.9, 1), DegenerateInput);
    CHECK_THROWS_AS(bootstrap_ci({1.0}, 10, 1.0, 1), DegenerateInput);
    CHECK_THROWS_AS(bootstrap_ci({1.0}, 10, 0.0, 1), DegenerateInput);
  }
}
