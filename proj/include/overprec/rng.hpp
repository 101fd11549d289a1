#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace overprec {

// FNV-1a; stable across platforms and runs, unlike std::hash.
std::uint64_t stable_hash(std::string_view text);

// SplitMix64 finalizer over the pair.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

inline std::uint64_t derive_seed(std::uint64_t base) { return mix_seed(base, 0); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::string_view part, Rest&&... rest);

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t part, Rest&&... rest) {
  return derive_seed(mix_seed(base, part), std::forward<Rest>(rest)...);
}

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::string_view part, Rest&&... rest) {
  return derive_seed(mix_seed(base, stable_hash(part)), std::forward<Rest>(rest)...);
}

/// Deterministic generator. The distributions are implemented here rather
/// than taken from <random> because the standard leaves their algorithms
/// unspecified, and archives must be byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n);  // [0, n)

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace overprec
