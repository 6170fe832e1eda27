#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace dataloop {

// Seeded generator whose draws are identical on every platform.
//
// std::mt19937_64 has a fully specified output sequence, but the standard
// distributions do not, so bounded draws are done here by rejection sampling
// on the raw 64-bit output:
//
//   threshold = (2^64 - n) mod n
//   repeat r = next() until r >= threshold; return r mod n
//
// Any pipeline step that needs randomness derives its own SeededRng from the
// project seed and a stable label (see derive_seed) so results do not depend
// on execution order.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform index in [0, n). `n` must be positive.
  std::size_t index(std::size_t n);

  /// Uniform real in [0, 1) with 53 bits of precision.
  double unit();

  /// Fisher-Yates, walking i from size-1 down to 1 and swapping with index(i+1).
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = index(i);
      using std::swap;
      swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a label (FNV-1a over the label, then splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

}  // namespace dataloop
