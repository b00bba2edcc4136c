#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

#include "normal.hpp"

namespace dcp {

// splitmix64 finalizer; decorrelates structured keys before seeding.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0,
                              std::uint64_t d = 0) {
  std::uint64_t s = splitmix64(a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return splitmix64(s ^ d);
}

// One independent random stream, keyed by (seed, stream index, purpose tag).
// mt19937_64 output is fixed by the standard and the normal transform is our
// own inverse-CDF, so draws are identical across platforms and thread counts.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream, std::string_view purpose)
      : gen_(mix_keys(seed, stream, hash_tag(purpose))) {}

  explicit StreamRng(std::uint64_t raw_seed) : gen_(raw_seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on (0,1), both endpoints excluded.
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_quantile(uniform01()); }

  // Uniform integer in [0, bound) by rejection; bound >= 1.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % bound;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

// Fisher-Yates with explicit draws; std::shuffle is implementation-defined,
// this keeps permutations reproducible everywhere.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, StreamRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace dcp
