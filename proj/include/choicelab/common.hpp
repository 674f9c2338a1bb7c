#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace choicelab {

using Mask = std::uint32_t;

// Thrown on malformed inputs, violated preconditions, and file errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline int popcount(Mask m) { return std::popcount(m); }

// Iterates the subsets of `sup` in ascending mask order: 0, ..., sup.
// Usage: for (Mask d = 0;; d = next_subset(d, sup)) { ...; if (d == sup) break; }
inline Mask next_subset(Mask d, Mask sup) { return (d - sup) & sup; }

// Rank of subset d within the subsets of sup, ascending mask order.
// Compresses the bits of d onto the bit positions of sup.
inline std::uint32_t subset_rank(Mask d, Mask sup) {
  std::uint32_t r = 0;
  int out = 0;
  while (sup) {
    const int b = std::countr_zero(sup);
    if (d >> b & 1u) r |= 1u << out;
    ++out;
    sup &= sup - 1;
  }
  return r;
}

}  // namespace choicelab
