#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "gpll/activation.hpp"
#include "gpll/feature.hpp"
#include "gpll/rng.hpp"

namespace gpll {

// One realization of the width-k network: Gaussian weight rows and fair signs.
struct NetworkDraw {
  Eigen::MatrixXd weights;  // k x n
  Eigen::VectorXd signs;    // entries in {-1, +1}
  std::uint64_t seed = 0;
};

// Finite-dimensional sample of a process at a fixed point set: row r holds one
// independent draw of the process values at all m points.
struct ProcessMarginalSample {
  Eigen::MatrixXd table;   // reps x m
  Eigen::MatrixXd points;  // m x n, unit rows
  std::int64_t k = 0;      // width; 0 marks the limiting Gaussian process
  std::string activation;
  std::uint64_t seed = 0;
};

struct KernelMatrix {
  Eigen::MatrixXd matrix;  // m x m
  double remainder = 0;    // tail energy beyond the truncation degree
  double jitter_used = 0;
};

inline Eigen::MatrixXd sphere_sample(int n, int m, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sphere_sample: need n >= 2");
  if (m < 1) throw std::invalid_argument("sphere_sample: need m >= 1");
  Eigen::MatrixXd points(m, n);
  for (int j = 0; j < m; ++j) {
    CounterRng rng(derive_seed(seed, std::uint64_t(j)), 0x706f696e74);
    double norm_sq = 0;
    while (norm_sq == 0) {
      for (int i = 0; i < n; ++i) points(j, i) = rng.gaussian();
      norm_sq = points.row(j).squaredNorm();
    }
    points.row(j) /= std::sqrt(norm_sq);
  }
  return points;
}

inline void require_unit_rows(const Eigen::Ref<const Eigen::MatrixXd>& points, double tol,
                              const char* where) {
  for (Eigen::Index j = 0; j < points.rows(); ++j)
    if (std::abs(points.row(j).norm() - 1.0) > tol)
      throw std::invalid_argument(std::string(where) + ": points must be unit vectors");
}

inline NetworkDraw draw_network(std::int64_t k, int n, std::uint64_t seed) {
  if (k < 1 || n < 1) throw std::invalid_argument("draw_network: need k >= 1, n >= 1");
  NetworkDraw d;
  d.seed = seed;
  d.weights.resize(k, n);
  d.signs.resize(k);
  CounterRng rng(seed, 0x6e6574);
  for (std::int64_t i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) d.weights(i, j) = rng.gaussian();
    d.signs[i] = rng.sign();
  }
  return d;
}

// (1/sqrt k) sum_i s_i act(w_i . x_j) for every point x_j.
inline Eigen::VectorXd evaluate_network(const NetworkDraw& draw, const Activation& act,
                                        const Eigen::Ref<const Eigen::MatrixXd>& points) {
  if (points.cols() != draw.weights.cols())
    throw std::invalid_argument("evaluate_network: dimension mismatch");
  Eigen::MatrixXd z = points * draw.weights.transpose();  // m x k
  for (Eigen::Index j = 0; j < z.rows(); ++j)
    for (Eigen::Index i = 0; i < z.cols(); ++i) z(j, i) = act(z(j, i));
  return z * draw.signs / std::sqrt(double(draw.weights.rows()));
}

inline ProcessMarginalSample sample_marginal(std::int64_t k, const Activation& act,
                                             const Eigen::Ref<const Eigen::MatrixXd>& points,
                                             std::int64_t reps, std::uint64_t seed) {
  if (reps < 1) throw std::invalid_argument("sample_marginal: need reps >= 1");
  ProcessMarginalSample out;
  out.points = points;
  out.k = k;
  out.activation = act.name();
  out.seed = seed;
  out.table.resize(reps, points.rows());
  for (std::int64_t r = 0; r < reps; ++r) {
    const NetworkDraw d = draw_network(k, int(points.cols()), derive_seed(seed, std::uint64_t(r)));
    out.table.row(r) = evaluate_network(d, act, points).transpose();
  }
  return out;
}

// Covariance of the limiting Gaussian process on unit points:
// K_jl = sum_m c_m^2 (x_j . x_l)^m up to the expansion's truncation degree,
// with the tail energy reported as a diagnostic rather than hidden.
inline KernelMatrix nngp_kernel(const HermiteExpansion& expansion,
                                const Eigen::Ref<const Eigen::MatrixXd>& points) {
  require_unit_rows(points, 1e-9, "nngp_kernel");
  const Eigen::Index m = points.rows();
  Eigen::MatrixXd rho = points * points.transpose();
  KernelMatrix out;
  out.matrix.resize(m, m);
  const int dmax = expansion.max_degree();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index l = j; l < m; ++l) {
      double v = 0;
      for (int t = dmax; t >= 0; --t)
        v = v * rho(j, l) + expansion.coefficients[std::size_t(t)] *
                                expansion.coefficients[std::size_t(t)];
      out.matrix(j, l) = v;
      out.matrix(l, j) = v;
    }
  }
  out.remainder = remainder(expansion, dmax);
  return out;
}

struct GpSample {
  ProcessMarginalSample sample;
  double jitter_used = 0;
  int attempts = 0;
};

// Draws from N(0, K + jitter I) via Cholesky. jitter < 0 selects the default
// policy: try 0, then 1e-12 tr(K)/m escalated tenfold at most six times.
inline GpSample sample_gp_marginal(const KernelMatrix& kernel, std::int64_t reps,
                                   std::uint64_t seed, double jitter = -1.0) {
  const Eigen::Index m = kernel.matrix.rows();
  if (kernel.matrix.cols() != m) throw std::invalid_argument("sample_gp_marginal: K not square");
  if (!kernel.matrix.isApprox(kernel.matrix.transpose(), 1e-9))
    throw std::invalid_argument("sample_gp_marginal: K not symmetric");
  if (reps < 1) throw std::invalid_argument("sample_gp_marginal: need reps >= 1");

  GpSample out;
  out.sample.points.resize(m, 0);
  out.sample.k = 0;
  out.sample.activation = "gp";
  out.sample.seed = seed;

  if (kernel.matrix.isZero(0)) {
    out.sample.table = Eigen::MatrixXd::Zero(reps, m);
    return out;
  }

  const double base = 1e-12 * std::max(kernel.matrix.trace(), 0.0) / double(m);
  Eigen::MatrixXd L;
  bool ok = false;
  double used = jitter < 0 ? 0.0 : jitter;
  for (int attempt = 0; attempt <= 6; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(kernel.matrix +
                                    used * Eigen::MatrixXd::Identity(m, m));
    ++out.attempts;
    if (llt.info() == Eigen::Success) {
      L = llt.matrixL();
      ok = true;
      break;
    }
    used = used == 0 ? std::max(base, 1e-300) : used * 10;
  }
  if (!ok)
    throw std::runtime_error("sample_gp_marginal: factorization failed up to jitter " +
                             std::to_string(used));
  out.jitter_used = used;

  out.sample.table.resize(reps, m);
  Eigen::VectorXd z(m);
  for (std::int64_t r = 0; r < reps; ++r) {
    CounterRng rng(derive_seed(seed, std::uint64_t(r)), 0x6770);
    for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.gaussian();
    out.sample.table.row(r) = (L * z).transpose();
  }
  return out;
}

struct McEstimate {
  double value = 0;
  double stderr_value = 0;
  std::int64_t reps = 0;
};

// Shared-draw coupling of two activations: both networks reuse the same
// weights and signs, so the mean over points of the squared difference
// estimates the L2(gamma) distance between the activations.
inline McEstimate coupled_l2_discrepancy(const Activation& f, const Activation& g, std::int64_t k,
                                         const Eigen::Ref<const Eigen::MatrixXd>& points,
                                         std::int64_t reps, std::uint64_t seed) {
  if (reps < 1) throw std::invalid_argument("coupled_l2_discrepancy: need reps >= 1");
  const Eigen::Index m = points.rows();
  const double inv_sqrt_k = 1.0 / std::sqrt(double(k));
  double sum = 0, sum_sq = 0;
  for (std::int64_t r = 0; r < reps; ++r) {
    const NetworkDraw d = draw_network(k, int(points.cols()), derive_seed(seed, std::uint64_t(r)));
    Eigen::VectorXd diff = Eigen::VectorXd::Zero(m);
    for (std::int64_t i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double z = points.row(j).dot(d.weights.row(i));
        diff[j] += d.signs[i] * (f(z) - g(z));
      }
    }
    const double v = diff.squaredNorm() * inv_sqrt_k * inv_sqrt_k / double(m);
    sum += v;
    sum_sq += v * v;
  }
  McEstimate out;
  out.reps = reps;
  out.value = sum / double(reps);
  const double var = std::max(0.0, sum_sq / double(reps) - out.value * out.value);
  out.stderr_value = std::sqrt(var / double(reps));
  return out;
}

// Draws of the normalized feature sum (1/sqrt k) sum_i s_i P(w_i), one row per
// draw, in the coordinates of the embedding basis.
inline Eigen::MatrixXd feature_sum_sample(const std::vector<double>& poly, int n, std::int64_t k,
                                          std::int64_t reps, std::uint64_t seed,
                                          std::size_t index_cap = 2000000) {
  if (k < 1 || reps < 1) throw std::invalid_argument("feature_sum_sample: need k, reps >= 1");
  const FeatureBasis basis = make_feature_basis(n, int(poly.size()) - 1, index_cap);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(reps, basis.dim());
  const double inv_sqrt_k = 1.0 / std::sqrt(double(k));
  Eigen::VectorXd w(n);
  for (std::int64_t r = 0; r < reps; ++r) {
    CounterRng rng(derive_seed(seed, std::uint64_t(r)), 0x66656174);
    for (std::int64_t i = 0; i < k; ++i) {
      for (int j = 0; j < n; ++j) w[j] = rng.gaussian();
      const double s = rng.sign();
      out.row(r) += s * embed_point(w, poly, basis).coords.transpose();
    }
    out.row(r) *= inv_sqrt_k;
  }
  return out;
}

}  // namespace gpll
