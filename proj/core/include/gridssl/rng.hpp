#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace gridssl {

// splitmix64 step (Steele et al.). Used for seed expansion and derivation so
// that streams are reproducible across platforms and library versions.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derive an independent stream seed from (master, stream, counter).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t counter) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0xD1342543DE82EF95ull;
  std::uint64_t b = splitmix64(s);
  s ^= counter * 0xAF251AF3B0F025B5ull;
  std::uint64_t c = splitmix64(s);
  return a ^ (b + 0x9E3779B97F4A7C15ull) ^ (c << 1);
}

// mt19937_64 wrapper with hand-rolled distributions. std::uniform_*_distribution
// and std::shuffle are implementation-defined and would break byte-identical
// logs across standard libraries, so only the raw engine is used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(s) >> 32),
                      static_cast<std::uint32_t>(splitmix64(s)),
                      static_cast<std::uint32_t>(splitmix64(s) >> 32),
                      static_cast<std::uint32_t>(splitmix64(s))};
    eng_.seed(seq);
  }

  std::uint64_t bits() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection on the top bits.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t mask = ~0ull >> __builtin_clzll((n - 1) | 1);
    std::uint64_t r;
    do {
      r = eng_() & mask;
    } while (r >= n);
    return r;
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::uint32_t> permutation(std::size_t n) {
    std::vector<std::uint32_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace gridssl
