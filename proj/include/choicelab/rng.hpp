#pragma once

#include <cstdint>
#include <vector>

namespace choicelab {

// Counter-based generator: output i of stream (key) is mix64(key + i*gamma),
// the SplitMix64 finalizer over a keyed counter. Streams derived from a root
// seed plus context indices (cell, replication) are independent by key
// separation, so concurrent replications draw identical values regardless of
// scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key), ctr_(0) {}

  // Derives a child key from (seed, a, b, c) context indices.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t a = 0,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t k = mix64(seed + kGamma);
    k = mix64(k ^ mix64(a + 2 * kGamma));
    k = mix64(k ^ mix64(b + 3 * kGamma));
    k = mix64(k ^ mix64(c + 5 * kGamma));
    return k;
  }

  std::uint64_t next_u64() { return mix64(key_ + (++ctr_) * kGamma); }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Rejection-free multiply-shift; bias is negligible for n << 2^64.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // One draw from the categorical distribution given by `probs` (renormalized
  // internally so slightly unnormalized inputs are fine).
  std::size_t next_categorical(const std::vector<double>& probs) {
    double total = 0;
    for (double p : probs) total += p;
    double u = next_double() * total;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      u -= probs[i];
      if (u < 0) return i;
    }
    return probs.empty() ? 0 : probs.size() - 1;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t ctr_;
};

}  // namespace choicelab
