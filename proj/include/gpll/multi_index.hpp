#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gpll/activation.hpp"

namespace gpll {

// Exponent vector of a monomial in n variables.
using MultiIndex = std::vector<int>;

// Polynomial in n variables as a sparse coefficient map. std::map keys are
// lexicographically ordered, so iteration order is deterministic.
using PolyMap = std::map<MultiIndex, double>;

inline int total_degree(const MultiIndex& I) { return std::accumulate(I.begin(), I.end(), 0); }

// Number of multi-indices of total degree m in n variables, C(n+m-1, m),
// evaluated in floating point (used for cap checks before enumeration).
inline double multi_index_count(int n, int m) {
  if (n < 1 || m < 0) throw std::invalid_argument("multi_index_count: need n >= 1, m >= 0");
  return std::exp(std::lgamma(double(n + m)) - std::lgamma(double(m + 1)) - std::lgamma(double(n)));
}

// All multi-indices of total degree m in n variables, ordered with the first
// coordinate decreasing (then recursively on the remaining coordinates).
inline std::vector<MultiIndex> multi_indices(int n, int m, std::size_t cap = 2000000) {
  if (multi_index_count(n, m) > double(cap) * 1.0000001)
    throw std::length_error("multi_indices: index count exceeds cap");
  std::vector<MultiIndex> out;
  MultiIndex cur(n, 0);
  const auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == n - 1) {
      cur[pos] = remaining;
      out.push_back(cur);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      cur[pos] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  rec(rec, 0, m);
  return out;
}

// Multinomial coefficient m!/prod_i I_i! for |I| = m.
inline double multinomial(int m, const MultiIndex& I) {
  if (total_degree(I) != m) throw std::invalid_argument("multinomial: |I| != m");
  double log_c = std::lgamma(m + 1.0);
  for (int e : I) log_c -= std::lgamma(e + 1.0);
  return std::exp(log_c);
}

// E[w^I] for w standard Gaussian in n dimensions:
// prod_i (I_i - 1)!! when every exponent is even, else 0.
inline double gaussian_moment(const MultiIndex& I) {
  double r = 1;
  for (int e : I) {
    if (e < 0) throw std::invalid_argument("gaussian_moment: negative exponent");
    if (e % 2 == 1) return 0.0;
    r *= double_factorial(e - 1);
  }
  return r;
}

inline MultiIndex add_indices(const MultiIndex& I, const MultiIndex& J) {
  if (I.size() != J.size()) throw std::invalid_argument("add_indices: dimension mismatch");
  MultiIndex K(I.size());
  for (std::size_t i = 0; i < I.size(); ++i) K[i] = I[i] + J[i];
  return K;
}

}  // namespace gpll
