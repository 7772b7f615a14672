#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gpll/multi_index.hpp"
#include "gpll/rng.hpp"

namespace gpll {

// Basis of the feature space: all monomial multi-indices of degree 0..d in n
// variables, concatenated level by level.
struct FeatureBasis {
  int n = 0;
  int d = 0;
  std::vector<MultiIndex> index_list;
  std::vector<Eigen::Index> level_offset;  // level m spans [offset[m], offset[m+1])

  Eigen::Index dim() const { return Eigen::Index(index_list.size()); }
  int level_of(Eigen::Index i) const {
    return total_degree(index_list[std::size_t(i)]);
  }
};

inline FeatureBasis make_feature_basis(int n, int d, std::size_t index_cap = 2000000) {
  if (n < 1 || d < 0) throw std::invalid_argument("make_feature_basis: need n >= 1, d >= 0");
  FeatureBasis b;
  b.n = n;
  b.d = d;
  b.level_offset.assign(std::size_t(d) + 2, 0);
  for (int m = 0; m <= d; ++m) {
    auto level = multi_indices(n, m, index_cap);
    b.level_offset[std::size_t(m) + 1] =
        b.level_offset[std::size_t(m)] + Eigen::Index(level.size());
    for (auto& I : level) b.index_list.push_back(std::move(I));
    if (b.index_list.size() > index_cap)
      throw std::length_error("make_feature_basis: basis dimension exceeds cap");
  }
  return b;
}

// Coordinate scaling of the flattened symmetric-tensor embedding: the index-I
// coordinate at level m carries weight sqrt(|a_m| * C(m,I)) so that inner
// products of embedded points reproduce powers of the Euclidean inner product.
template <typename Scalar>
Scalar index_scale(Scalar abs_coef, const MultiIndex& I) {
  const int m = total_degree(I);
  return std::sqrt(abs_coef * Scalar(multinomial(m, I)));
}

template <typename Scalar = double>
struct FeatureVector {
  const FeatureBasis* basis = nullptr;
  Eigen::Vector<Scalar, Eigen::Dynamic> coords;
};

namespace detail {

template <typename Scalar, typename Derived>
Scalar monomial_value(const Eigen::MatrixBase<Derived>& x, const MultiIndex& I) {
  Scalar v = 1;
  for (std::size_t i = 0; i < I.size(); ++i)
    for (int e = 0; e < I[i]; ++e) v *= x[Eigen::Index(i)];
  return v;
}

}  // namespace detail

// Embedding of a point under the polynomial p(t) = sum_m poly[m] t^m:
// level-m coordinates are sqrt(|a_m| C(m,I)) x^I.
template <typename Derived>
FeatureVector<typename Derived::Scalar> embed_point(const Eigen::MatrixBase<Derived>& x,
                                                    const std::vector<double>& poly,
                                                    const FeatureBasis& basis) {
  using Scalar = typename Derived::Scalar;
  if (x.size() != basis.n) throw std::invalid_argument("embed_point: dimension mismatch");
  if (int(poly.size()) != basis.d + 1)
    throw std::invalid_argument("embed_point: polynomial degree does not match basis");
  FeatureVector<Scalar> out;
  out.basis = &basis;
  out.coords.resize(basis.dim());
  for (Eigen::Index i = 0; i < basis.dim(); ++i) {
    const MultiIndex& I = basis.index_list[std::size_t(i)];
    const int m = total_degree(I);
    const double a = poly[std::size_t(m)];
    out.coords[i] = a == 0 ? Scalar(0)
                           : index_scale(Scalar(std::abs(a)), I) *
                                 detail::monomial_value<Scalar>(x, I);
  }
  return out;
}

// Sign-weighted bilinear form: levels where a_m < 0 contribute with a minus
// sign, so that the form applied to two embedded points gives p(x . y).
template <typename Scalar>
Scalar q_form(const FeatureVector<Scalar>& u, const FeatureVector<Scalar>& v,
              const std::vector<double>& poly) {
  if (u.basis != v.basis || u.basis == nullptr)
    throw std::invalid_argument("q_form: basis mismatch");
  const FeatureBasis& b = *u.basis;
  Scalar total = 0;
  for (int m = 0; m <= b.d; ++m) {
    const Eigen::Index lo = b.level_offset[std::size_t(m)];
    const Eigen::Index len = b.level_offset[std::size_t(m) + 1] - lo;
    if (len == 0 || poly[std::size_t(m)] == 0) continue;
    const Scalar sign = poly[std::size_t(m)] < 0 ? Scalar(-1) : Scalar(1);
    total += sign * u.coords.segment(lo, len).dot(v.coords.segment(lo, len));
  }
  return total;
}

struct CovarianceOperator {
  FeatureBasis basis;
  Eigen::MatrixXd matrix;
  bool analytic = true;
  std::int64_t sample_count = 0;
  std::uint64_t seed = 0;
};

// Exact covariance of the embedded standard Gaussian: entries reduce to
// independent-coordinate Gaussian moments.
inline CovarianceOperator covariance_analytic(const std::vector<double>& poly, int n,
                                              Eigen::Index dense_cap = 4000) {
  CovarianceOperator cov;
  cov.basis = make_feature_basis(n, int(poly.size()) - 1);
  const Eigen::Index dim = cov.basis.dim();
  if (dim > dense_cap) throw std::length_error("covariance_analytic: dense dimension cap exceeded");
  std::vector<double> scale(static_cast<std::size_t>(dim));
  std::vector<double> mean(static_cast<std::size_t>(dim));
  for (Eigen::Index i = 0; i < dim; ++i) {
    const MultiIndex& I = cov.basis.index_list[std::size_t(i)];
    const double a = poly[std::size_t(total_degree(I))];
    scale[std::size_t(i)] = a == 0 ? 0.0 : index_scale(std::abs(a), I);
    mean[std::size_t(i)] = gaussian_moment(I);
  }
  cov.matrix.resize(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i; j < dim; ++j) {
      double e = 0;
      if (scale[std::size_t(i)] != 0 && scale[std::size_t(j)] != 0) {
        const MultiIndex sum = add_indices(cov.basis.index_list[std::size_t(i)],
                                           cov.basis.index_list[std::size_t(j)]);
        e = scale[std::size_t(i)] * scale[std::size_t(j)] *
            (gaussian_moment(sum) - mean[std::size_t(i)] * mean[std::size_t(j)]);
      }
      cov.matrix(i, j) = e;
      cov.matrix(j, i) = e;
    }
  }
  return cov;
}

// Sample covariance over i.i.d. standard Gaussian inputs, unbiased
// normalization. Accumulation runs in fixed blocks with per-block seeds so the
// result does not depend on scheduling.
inline CovarianceOperator covariance_empirical(const std::vector<double>& poly, int n,
                                               std::int64_t samples, std::uint64_t seed,
                                               Eigen::Index dense_cap = 4000) {
  if (samples < 2) throw std::invalid_argument("covariance_empirical: need samples >= 2");
  CovarianceOperator cov;
  cov.basis = make_feature_basis(n, int(poly.size()) - 1);
  cov.analytic = false;
  cov.sample_count = samples;
  cov.seed = seed;
  const Eigen::Index dim = cov.basis.dim();
  if (dim > dense_cap) throw std::length_error("covariance_empirical: dense dimension cap exceeded");

  const std::int64_t block_size = 4096;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd w(n), p(dim);
  std::int64_t done = 0;
  for (std::int64_t block = 0; done < samples; ++block) {
    CounterRng rng(seed, std::uint64_t(block) + 1);
    const std::int64_t count = std::min(block_size, samples - done);
    for (std::int64_t s = 0; s < count; ++s) {
      for (int i = 0; i < n; ++i) w[i] = rng.gaussian();
      p = embed_point(w, poly, cov.basis).coords;
      sum += p;
      outer.selfadjointView<Eigen::Lower>().rankUpdate(p);
    }
    done += count;
  }
  Eigen::MatrixXd full = outer.selfadjointView<Eigen::Lower>();
  const double ns = double(samples);
  cov.matrix = (full - sum * sum.transpose() / ns) / (ns - 1.0);
  return cov;
}

// Var(q(w)) for q(x) = sum_I v_I x^I via direct second moments.
inline double polynomial_variance_moments(const PolyMap& coeffs) {
  double mean = 0;
  for (const auto& [I, v] : coeffs) mean += v * gaussian_moment(I);
  double second = 0;
  for (const auto& [I, vi] : coeffs)
    for (const auto& [J, vj] : coeffs) second += vi * vj * gaussian_moment(add_indices(I, J));
  return second - mean * mean;
}

namespace detail {

// prod_i J_i (J_i-1) ... (J_i-K_i+1); zero when any K_i exceeds J_i.
inline double falling_product(const MultiIndex& J, const MultiIndex& K) {
  double f = 1;
  for (std::size_t i = 0; i < J.size(); ++i) {
    if (K[i] > J[i]) return 0;
    for (int t = 0; t < K[i]; ++t) f *= double(J[i] - t);
  }
  return f;
}

}  // namespace detail

// Var(q(w)) via the derivative expansion sum_m ||E[grad^m q(w)]||^2 / m!,
// where the m-tensor norm counts each distinct index pattern K with its
// multinomial multiplicity.
inline double polynomial_variance_derivative_expansion(const PolyMap& coeffs) {
  if (coeffs.empty()) return 0;
  const int n = int(coeffs.begin()->first.size());
  int degree = 0;
  for (const auto& [J, v] : coeffs) {
    if (int(J.size()) != n)
      throw std::invalid_argument("polynomial_variance_derivative_expansion: mixed dimensions");
    (void)v;
    degree = std::max(degree, total_degree(J));
  }
  double var = 0;
  for (int m = 1; m <= degree; ++m) {
    double norm_sq = 0;
    for (const MultiIndex& K : multi_indices(n, m)) {
      double t = 0;
      for (const auto& [J, v] : coeffs) {
        const double f = detail::falling_product(J, K);
        if (f == 0) continue;
        MultiIndex R(J.size());
        for (std::size_t i = 0; i < J.size(); ++i) R[i] = J[i] - K[i];
        t += v * f * gaussian_moment(R);
      }
      norm_sq += multinomial(m, K) * t * t;
    }
    var += norm_sq / std::exp(std::lgamma(m + 1.0));
  }
  return var;
}

struct Spectrum {
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // columns match eigenvalues
};

// Symmetric eigendecomposition, eigenvalues descending, each eigenvector
// canonicalized so its first nonzero coordinate is positive.
inline Spectrum spectrum(const CovarianceOperator& cov) {
  const Eigen::MatrixXd& S = cov.matrix;
  if (S.rows() != S.cols() || !S.isApprox(S.transpose(), 1e-10))
    throw std::invalid_argument("spectrum: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectrum: eigensolver failed");
  Spectrum out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvectors = es.eigenvectors().rowwise().reverse();
  for (Eigen::Index j = 0; j < out.eigenvectors.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.eigenvectors.rows(); ++i) {
      const double v = out.eigenvectors(i, j);
      if (std::abs(v) > 1e-12) {
        if (v < 0) out.eigenvectors.col(j) = -out.eigenvectors.col(j);
        break;
      }
    }
  }
  return out;
}

struct SpectralSplit {
  double threshold = 0;
  Eigen::VectorXd kept_values;
  Eigen::MatrixXd kept_vectors;
  Eigen::VectorXd discarded_values;
  Eigen::MatrixXd discarded_vectors;
  double penalty = 0;  // additive transport penalty 8 n^d threshold
};

inline SpectralSplit truncate_spectrum(const CovarianceOperator& cov, double delta) {
  if (delta < 0) throw std::invalid_argument("truncate_spectrum: need delta >= 0");
  const Spectrum sp = spectrum(cov);
  Eigen::Index keep = 0;
  while (keep < sp.eigenvalues.size() && sp.eigenvalues[keep] > delta) ++keep;
  SpectralSplit out;
  out.threshold = delta;
  out.kept_values = sp.eigenvalues.head(keep);
  out.kept_vectors = sp.eigenvectors.leftCols(keep);
  out.discarded_values = sp.eigenvalues.tail(sp.eigenvalues.size() - keep);
  out.discarded_vectors = sp.eigenvectors.rightCols(sp.eigenvalues.size() - keep);
  out.penalty = 8.0 * std::pow(double(cov.basis.n), double(cov.basis.d)) * delta;
  return out;
}

struct BoundValue {
  double value = 0;
  double log_value = 0;
};

// Threshold rule for discarding small eigenvalues before the transport
// comparison: ((110 d)! n^{2d-1/2} max|a|^3 / k)^{1/3}, evaluated in the log
// domain; value overflows to inf around d >= 4 while log_value stays finite.
inline BoundValue spectral_threshold_rule(int n, double k, int d, double max_abs_coef) {
  if (n < 1 || k <= 0 || d < 1 || max_abs_coef < 0)
    throw std::invalid_argument("spectral_threshold_rule: bad parameters");
  BoundValue out;
  if (max_abs_coef == 0) {
    out.value = 0;
    out.log_value = -std::numeric_limits<double>::infinity();
    return out;
  }
  out.log_value = (std::lgamma(110.0 * d + 1.0) + (2.0 * d - 0.5) * std::log(double(n)) +
                   3.0 * std::log(max_abs_coef) - std::log(k)) /
                  3.0;
  out.value = std::exp(out.log_value);
  return out;
}

// Operator-norm bound (4d)! max|a_m| n^{(d-1)/2} in log domain.
inline BoundValue sigma_upper_bound_rhs(int d, int n, double max_abs_coef) {
  if (d < 1 || n < 1 || max_abs_coef < 0)
    throw std::invalid_argument("sigma_upper_bound_rhs: bad parameters");
  BoundValue out;
  if (max_abs_coef == 0) {
    out.value = 0;
    out.log_value = -std::numeric_limits<double>::infinity();
    return out;
  }
  out.log_value = std::lgamma(4.0 * d + 1.0) + std::log(max_abs_coef) +
                  0.5 * (d - 1.0) * std::log(double(n));
  out.value = std::exp(out.log_value);
  return out;
}

// Witness polynomial for near-extremal variance growth:
// q(x) = n^{-l/2} sum over ordered tuples of distinct indices (i1,...,il) of
// x_{i1} x_{i2}^2 ... x_{il}^2, accumulated as a coefficient map.
inline PolyMap sharpness_polynomial(int n, int l, double term_cap = 2000000) {
  if (n < 2 || l < 1) throw std::invalid_argument("sharpness_polynomial: need n >= 2, l >= 1");
  double tuples = 1;
  for (int t = 0; t < l; ++t) tuples *= double(n - t);
  if (l > n || tuples > term_cap) throw std::length_error("sharpness_polynomial: term cap exceeded");
  const double weight = std::pow(double(n), -0.5 * l);
  PolyMap q;
  std::vector<int> tuple(static_cast<std::size_t>(l));
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  const auto rec = [&](auto&& self, int pos) -> void {
    if (pos == l) {
      MultiIndex I(std::size_t(n), 0);
      I[std::size_t(tuple[0])] += 1;
      for (int t = 1; t < l; ++t) I[std::size_t(tuple[std::size_t(t)])] += 2;
      q[I] += weight;
      return;
    }
    for (int i = 0; i < n; ++i) {
      if (used[std::size_t(i)]) continue;
      used[std::size_t(i)] = 1;
      tuple[std::size_t(pos)] = i;
      self(self, pos + 1);
      used[std::size_t(i)] = 0;
    }
  };
  rec(rec, 0);
  return q;
}

// Operator norm of the feature covariance for p(x) = x^2 at dimension n;
// dimension-free by design of the scaled coordinates.
inline double quadratic_opnorm_audit(int n, Eigen::Index dense_cap = 4000) {
  const CovarianceOperator cov = covariance_analytic({0.0, 0.0, 1.0}, n, dense_cap);
  const Spectrum sp = spectrum(cov);
  return sp.eigenvalues.size() == 0 ? 0.0 : std::abs(sp.eigenvalues[0]);
}

}  // namespace gpll
