#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "mfga/errors.hpp"

namespace mfga {

// Exponent vector of the monomial x^alpha = prod_i x_i^alpha[i].
struct MultiIndex {
  std::vector<int> exponents;

  int dim() const { return static_cast<int>(exponents.size()); }
  int order() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }
  bool operator==(const MultiIndex&) const = default;
};

// Exact C(n, k) using the stepwise product; each partial result is itself a
// binomial coefficient, so the division is always exact.
inline std::uint64_t n_choose_k(int n, int k) {
  if (k < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / i;
  return r;
}

// Number of alpha in dimension d with |alpha| <= max_order: C(d + r, r).
inline std::uint64_t multi_index_count(int d, int max_order) {
  if (d < 1 || max_order < 0) throw Error("multi_index_count: need d >= 1 and order >= 0");
  return n_choose_k(d + max_order, max_order);
}

// All alpha with |alpha| <= max_order, graded by total order. Within one grade
// the first coordinate runs from the grade down to zero, then the rest recurse,
// e.g. d=2, r=2: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2).
inline std::vector<MultiIndex> enumerate_multi_indices(int d, int max_order) {
  if (d < 1 || max_order < 0) throw Error("enumerate_multi_indices: need d >= 1 and order >= 0");
  std::vector<MultiIndex> out;
  out.reserve(multi_index_count(d, max_order));
  std::vector<int> cur(d, 0);
  auto fill = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == d - 1) {
      cur[pos] = remaining;
      out.push_back(MultiIndex{cur});
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      cur[pos] = e;
      self(self, pos + 1, remaining - e);
    }
  };
  for (int grade = 0; grade <= max_order; ++grade) fill(fill, 0, grade);
  return out;
}

}  // namespace mfga
