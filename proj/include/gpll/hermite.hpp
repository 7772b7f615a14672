#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace gpll {

// Normalized probabilists' Hermite polynomials h_m: orthonormal with respect
// to the standard Gaussian, h_0 = 1, h_1(x) = x,
// h_{m+1}(x) = (x h_m(x) - sqrt(m) h_{m-1}(x)) / sqrt(m+1).
template <typename Scalar>
Scalar hermite_eval(int m, Scalar x) {
  if (m < 0) throw std::invalid_argument("hermite_eval: negative degree");
  Scalar hm1 = 0, h = 1;
  for (int j = 0; j < m; ++j) {
    const Scalar next = (x * h - std::sqrt(Scalar(j)) * hm1) / std::sqrt(Scalar(j + 1));
    hm1 = h;
    h = next;
  }
  return h;
}

// All values h_0(x)..h_mmax(x) in one sweep of the recurrence.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> hermite_eval_all(int mmax, Scalar x) {
  if (mmax < 0) throw std::invalid_argument("hermite_eval_all: negative degree");
  Eigen::Vector<Scalar, Eigen::Dynamic> h(mmax + 1);
  h[0] = 1;
  if (mmax >= 1) h[1] = x;
  for (int j = 1; j < mmax; ++j)
    h[j + 1] = (x * h[j] - std::sqrt(Scalar(j)) * h[j - 1]) / std::sqrt(Scalar(j + 1));
  return h;
}

// h_m(0) by the parity closed form: 0 for odd m,
// (-1)^{m/2} (m-1)!! / sqrt(m!) for even m, evaluated in log-domain.
inline double hermite_zero(int m) {
  if (m < 0) throw std::invalid_argument("hermite_zero: negative degree");
  if (m % 2 == 1) return 0.0;
  if (m == 0) return 1.0;
  const int half = m / 2;
  // (m-1)!! = m! / (2^{m/2} (m/2)!)
  const double log_val = 0.5 * std::lgamma(m + 1.0) - half * std::log(2.0) - std::lgamma(half + 1.0);
  return (half % 2 == 0 ? 1.0 : -1.0) * std::exp(log_val);
}

// Monomial coefficients of h_0..h_d stacked as columns of a (d+1)x(d+1)
// lower-triangular-by-degree matrix: column m holds the coefficients of h_m.
// Built by running the three-term recurrence in the monomial basis, which is
// numerically benign for the degrees used here.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> hermite_monomial_table(int d) {
  if (d < 0) throw std::invalid_argument("hermite_monomial_table: negative degree");
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat T = Mat::Zero(d + 1, d + 1);
  T(0, 0) = 1;
  if (d >= 1) T(1, 1) = 1;
  for (int m = 1; m < d; ++m) {
    const Scalar a = 1 / std::sqrt(Scalar(m + 1)), b = std::sqrt(Scalar(m)) / std::sqrt(Scalar(m + 1));
    for (int r = 0; r <= m; ++r) T(r + 1, m + 1) += a * T(r, m);
    for (int r = 0; r <= m - 1; ++r) T(r, m + 1) -= b * T(r, m - 1);
  }
  return T;
}

// Basis change: coefficients c_0..c_d in the h-basis -> monomial coefficients
// of sum_m c_m h_m.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> hermite_to_monomial(
    const Eigen::Vector<Scalar, Eigen::Dynamic>& hermite_coeffs) {
  const int d = int(hermite_coeffs.size()) - 1;
  if (d < 0) throw std::invalid_argument("hermite_to_monomial: empty coefficient vector");
  return hermite_monomial_table<Scalar>(d) * hermite_coeffs;
}

// Inverse basis change: monomial coefficients a_0..a_d -> h-basis coefficients.
// Uses x * h_m = sqrt(m+1) h_{m+1} + sqrt(m) h_{m-1} to build each power of x
// in the h-basis exactly.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> monomial_to_hermite(
    const Eigen::Vector<Scalar, Eigen::Dynamic>& a) {
  const int d = int(a.size()) - 1;
  if (d < 0) throw std::invalid_argument("monomial_to_hermite: empty coefficient vector");
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  Vec out = Vec::Zero(d + 1);
  Vec power = Vec::Zero(d + 1);  // x^r in the h-basis
  power[0] = 1;
  out[0] = a[0];
  for (int r = 1; r <= d; ++r) {
    Vec next = Vec::Zero(d + 1);
    for (int m = 0; m <= d; ++m) {
      if (power[m] == Scalar(0)) continue;
      if (m + 1 <= d) next[m + 1] += std::sqrt(Scalar(m + 1)) * power[m];
      if (m - 1 >= 0) next[m - 1] += std::sqrt(Scalar(m)) * power[m];
    }
    power = next;
    out += a[r] * power;
  }
  return out;
}

}  // namespace gpll
