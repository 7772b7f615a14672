#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpll/process.hpp"
#include "gpll/rng.hpp"

namespace gpll {

enum class TransportEstimator { sorted_1d, assignment, sinkhorn, gaussian_closed_form };
enum class CostNormalization { raw, per_point };

inline const char* estimator_name(TransportEstimator e) {
  switch (e) {
    case TransportEstimator::sorted_1d: return "sorted_1d";
    case TransportEstimator::assignment: return "assignment";
    case TransportEstimator::sinkhorn: return "sinkhorn";
    case TransportEstimator::gaussian_closed_form: return "gaussian_closed_form";
  }
  return "unknown";
}

// Squared-distance estimate with provenance. `squared` flags the scale
// explicitly so squared and unsquared readings are never mixed up.
struct TransportEstimate {
  double value = 0;
  bool squared = true;
  TransportEstimator estimator = TransportEstimator::assignment;
  CostNormalization normalization = CostNormalization::raw;
  double ci_low = 0;
  double ci_high = 0;
  int iterations = 0;
  double violation = 0;
  double epsilon = 0;
};

// Exact 1-D squared transport distance: match sorted samples.
inline TransportEstimate w2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("w2_1d: length mismatch");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  TransportEstimate out;
  out.value = total / double(a.size());
  out.estimator = TransportEstimator::sorted_1d;
  out.ci_low = out.ci_high = out.value;
  return out;
}

namespace detail {

// Minimum-cost perfect matching via shortest augmenting paths with potentials.
inline double assignment_cost(const Eigen::MatrixXd& cost) {
  const int n = int(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(std::size_t(n) + 1, 0), v(std::size_t(n) + 1, 0);
  std::vector<int> match(std::size_t(n) + 1, 0), path(std::size_t(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> min_slack(std::size_t(n) + 1, inf);
    std::vector<char> visited(std::size_t(n) + 1, 0);
    do {
      visited[std::size_t(j0)] = 1;
      const int i0 = match[std::size_t(j0)];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (visited[std::size_t(j)]) continue;
        const double slack = cost(i0 - 1, j - 1) - u[std::size_t(i0)] - v[std::size_t(j)];
        if (slack < min_slack[std::size_t(j)]) {
          min_slack[std::size_t(j)] = slack;
          path[std::size_t(j)] = j0;
        }
        if (min_slack[std::size_t(j)] < delta) {
          delta = min_slack[std::size_t(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (visited[std::size_t(j)]) {
          u[std::size_t(match[std::size_t(j)])] += delta;
          v[std::size_t(j)] -= delta;
        } else {
          min_slack[std::size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[std::size_t(j0)] != 0);
    do {
      const int j1 = path[std::size_t(j0)];
      match[std::size_t(j0)] = match[std::size_t(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0;
  for (int j = 1; j <= n; ++j) total += cost(match[std::size_t(j)] - 1, j - 1);
  return total;
}

inline Eigen::MatrixXd pairwise_sq_dist(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                        const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("pairwise_sq_dist: dimension mismatch");
  Eigen::MatrixXd cost = -2.0 * a * b.transpose();
  cost.colwise() += a.rowwise().squaredNorm();
  cost.rowwise() += b.rowwise().squaredNorm().transpose();
  return cost.cwiseMax(0.0);
}

inline double median_of(Eigen::MatrixXd values) {
  const Eigen::Index count = values.size();
  if (count == 0) throw std::invalid_argument("median_of: empty");
  double* begin = values.data();
  double* mid = begin + count / 2;
  std::nth_element(begin, mid, begin + count);
  return *mid;
}

struct EntropicValue {
  double value = 0;
  int iterations = 0;
  double violation = 0;
};

inline Eigen::VectorXd lse_rows(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd mx = m.rowwise().maxCoeff();
  return mx.array() + ((m.colwise() - mx).array().exp().rowwise().sum()).log();
}

// Entropic transport value between uniform empirical measures by log-domain
// scaling iterations; returns the dual objective mean(f) + mean(g).
inline EntropicValue entropic_cost(const Eigen::MatrixXd& cost, double eps, int max_iters,
                                   double tol = 1e-9) {
  const Eigen::Index na = cost.rows(), nb = cost.cols();
  const double log_a = -std::log(double(na)), log_b = -std::log(double(nb));
  Eigen::VectorXd f = Eigen::VectorXd::Zero(na), g = Eigen::VectorXd::Zero(nb);
  EntropicValue out;
  out.violation = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd scaled(na, nb);
  for (int it = 1; it <= max_iters; ++it) {
    scaled = ((-cost).colwise() + f) / eps;
    g = -eps * (lse_rows(scaled.transpose()).array() + log_a);
    scaled = ((-cost).rowwise() + g.transpose()) / eps;
    f = -eps * (lse_rows(scaled).array() + log_b);
    out.iterations = it;
    if (it % 10 == 0 || it == max_iters) {
      // after the f update the row marginals are exact; check columns
      scaled = (((-cost).colwise() + f).rowwise() + g.transpose()) / eps;
      const Eigen::VectorXd col_mass =
          scaled.array().exp().colwise().sum().transpose() * std::exp(log_a + log_b);
      out.violation = (col_mass.array() - std::exp(log_b)).abs().sum();
      if (out.violation <= tol) break;
    }
  }
  out.value = f.mean() + g.mean();
  return out;
}

// Same-measure entropic value via the averaged symmetric fixpoint update.
inline EntropicValue entropic_cost_symmetric(const Eigen::MatrixXd& cost, double eps,
                                             int max_iters, double tol = 1e-9) {
  const Eigen::Index n = cost.rows();
  const double log_a = -std::log(double(n));
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  EntropicValue out;
  out.violation = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd scaled(n, n);
  for (int it = 1; it <= max_iters; ++it) {
    scaled = ((-cost).colwise() + h) / eps;
    const Eigen::VectorXd next = -eps * (lse_rows(scaled.transpose()).array() + log_a);
    const double step = (next - h).array().abs().maxCoeff();
    h = 0.5 * (h + next);
    out.iterations = it;
    if (step <= tol * eps || it == max_iters) {
      scaled = (((-cost).colwise() + h).rowwise() + h.transpose()) / eps;
      const Eigen::VectorXd col_mass =
          scaled.array().exp().colwise().sum().transpose() * std::exp(2.0 * log_a);
      out.violation = (col_mass.array() - std::exp(log_a)).abs().sum();
      if (out.violation <= tol || it == max_iters) break;
    }
  }
  out.value = 2.0 * h.mean();
  return out;
}

}  // namespace detail

// Exact squared transport distance between equal-size empirical clouds.
inline TransportEstimate w2_exact(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                  const Eigen::Ref<const Eigen::MatrixXd>& b,
                                  Eigen::Index size_cap = 2048) {
  if (a.rows() != b.rows() || a.rows() == 0)
    throw std::invalid_argument("w2_exact: need equal nonempty sample sizes");
  if (a.rows() > size_cap)
    throw std::length_error("w2_exact: sample size exceeds the exact-assignment cap; use sinkhorn_divergence");
  TransportEstimate out;
  out.estimator = TransportEstimator::assignment;
  out.value = detail::assignment_cost(detail::pairwise_sq_dist(a, b)) / double(a.rows());
  out.ci_low = out.ci_high = out.value;
  return out;
}

// Debiased entropic divergence S_eps(A,B) = OT_eps(A,B) - (OT_eps(A,A) +
// OT_eps(B,B))/2. eps <= 0 selects the default 0.05 x median pairwise cost.
inline TransportEstimate sinkhorn_divergence(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                             const Eigen::Ref<const Eigen::MatrixXd>& b,
                                             double eps = -1.0, int max_iters = 2000) {
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("sinkhorn_divergence: empty input");
  const Eigen::MatrixXd cost_ab = detail::pairwise_sq_dist(a, b);
  if (eps <= 0) eps = 0.05 * detail::median_of(cost_ab);
  if (eps <= 0) eps = 1e-12;  // degenerate all-zero costs
  const auto ab = detail::entropic_cost(cost_ab, eps, max_iters);
  const auto aa = detail::entropic_cost_symmetric(detail::pairwise_sq_dist(a, a), eps, max_iters);
  const auto bb = detail::entropic_cost_symmetric(detail::pairwise_sq_dist(b, b), eps, max_iters);
  TransportEstimate out;
  out.estimator = TransportEstimator::sinkhorn;
  out.epsilon = eps;
  out.value = ab.value - 0.5 * (aa.value + bb.value);
  out.iterations = ab.iterations;
  out.violation = std::max(ab.violation, std::max(aa.violation, bb.violation));
  out.ci_low = out.ci_high = out.value;
  return out;
}

// Closed-form squared distance between Gaussians:
// |mu1-mu2|^2 + tr(C1 + C2 - 2 (C2^{1/2} C1 C2^{1/2})^{1/2}).
inline TransportEstimate w2_gaussian(const Eigen::Ref<const Eigen::VectorXd>& mean1,
                                     const Eigen::Ref<const Eigen::MatrixXd>& cov1,
                                     const Eigen::Ref<const Eigen::VectorXd>& mean2,
                                     const Eigen::Ref<const Eigen::MatrixXd>& cov2) {
  const Eigen::Index m = mean1.size();
  if (mean2.size() != m || cov1.rows() != m || cov1.cols() != m || cov2.rows() != m ||
      cov2.cols() != m)
    throw std::invalid_argument("w2_gaussian: dimension mismatch");
  const auto check_psd = [m](const Eigen::Ref<const Eigen::MatrixXd>& c,
                             const char* which) -> Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> {
    if (!c.isApprox(c.transpose(), 1e-9))
      throw std::invalid_argument(std::string("w2_gaussian: ") + which + " not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-9 * scale)
      throw std::invalid_argument(std::string("w2_gaussian: ") + which + " not positive semidefinite");
    (void)m;
    return es;
  };
  check_psd(cov1, "cov1");
  const auto es2 = check_psd(cov2, "cov2");
  const Eigen::MatrixXd sqrt2 = es2.eigenvectors() *
                                es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                es2.eigenvectors().transpose();
  const Eigen::MatrixXd inner = sqrt2 * cov1 * sqrt2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esi(0.5 * (inner + inner.transpose()));
  const double cross = esi.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  TransportEstimate out;
  out.estimator = TransportEstimator::gaussian_closed_form;
  out.value = (mean1 - mean2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * cross;
  out.value = std::max(out.value, 0.0);
  out.ci_low = out.ci_high = out.value;
  return out;
}

struct MarginalTransportOptions {
  TransportEstimator estimator = TransportEstimator::assignment;  // or sinkhorn
  bool auto_estimator = true;  // fall back to sinkhorn past the assignment cap
  double eps = -1.0;           // <= 0: 0.05 x median pairwise cost
  int max_iters = 2000;
  int bootstrap = 32;
  std::uint64_t seed = 17;
  Eigen::Index assignment_cap = 2048;
};

namespace detail {

inline double marginal_point_estimate(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                      const MarginalTransportOptions& opt,
                                      TransportEstimate* info) {
  if (a.cols() == 1 && opt.estimator == TransportEstimator::assignment) {
    std::vector<double> va(a.data(), a.data() + a.rows());
    std::vector<double> vb(b.data(), b.data() + b.rows());
    const auto est = w2_1d(std::move(va), std::move(vb));
    if (info) info->estimator = TransportEstimator::sorted_1d;
    return est.value;
  }
  if (opt.estimator == TransportEstimator::assignment) {
    const auto est = w2_exact(a, b, opt.assignment_cap);
    if (info) info->estimator = est.estimator;
    return est.value / double(a.cols());
  }
  const auto est = sinkhorn_divergence(a, b, opt.eps, opt.max_iters);
  if (info) {
    info->estimator = est.estimator;
    info->iterations = est.iterations;
    info->violation = est.violation;
    info->epsilon = est.epsilon;
  }
  return est.value / double(a.cols());
}

}  // namespace detail

// Squared transport distance between the empirical laws of two marginal
// samples at the same point set, with per-point cost |u-v|^2 / m. This is an
// estimator of a lower bound on the squared functional transport distance:
// any coupling of the processes induces a coupling of the marginals, and the
// sphere integral is Monte Carlo'd by the m sampled points. Bootstrap CI over
// resampled rows.
inline TransportEstimate marginal_transport_estimate(const ProcessMarginalSample& a,
                                                     const ProcessMarginalSample& b,
                                                     MarginalTransportOptions opt = {}) {
  if (a.points.size() != b.points.size() ||
      (a.points.size() > 0 && b.points.size() > 0 && !a.points.isApprox(b.points, 1e-12)))
    throw std::invalid_argument("marginal_transport_estimate: point sets differ");
  if (a.table.cols() != b.table.cols())
    throw std::invalid_argument("marginal_transport_estimate: column mismatch");
  if (opt.auto_estimator && opt.estimator == TransportEstimator::assignment &&
      (a.table.rows() > opt.assignment_cap || b.table.rows() > opt.assignment_cap ||
       a.table.rows() != b.table.rows()))
    opt.estimator = TransportEstimator::sinkhorn;

  TransportEstimate out;
  out.normalization = CostNormalization::per_point;
  if (opt.estimator == TransportEstimator::sinkhorn && opt.eps <= 0)
    opt.eps = 0.05 * detail::median_of(detail::pairwise_sq_dist(a.table, b.table));
  out.value = detail::marginal_point_estimate(a.table, b.table, opt, &out);

  if (opt.bootstrap > 1) {
    std::vector<double> values(static_cast<std::size_t>(opt.bootstrap));
    Eigen::MatrixXd ra(a.table.rows(), a.table.cols());
    Eigen::MatrixXd rb(b.table.rows(), b.table.cols());
    for (int t = 0; t < opt.bootstrap; ++t) {
      CounterRng rng(derive_seed(opt.seed, std::uint64_t(t)), 0x626f6f74);
      for (Eigen::Index r = 0; r < ra.rows(); ++r)
        ra.row(r) = a.table.row(Eigen::Index(rng.next_u64() % std::uint64_t(a.table.rows())));
      for (Eigen::Index r = 0; r < rb.rows(); ++r)
        rb.row(r) = b.table.row(Eigen::Index(rng.next_u64() % std::uint64_t(b.table.rows())));
      values[std::size_t(t)] = detail::marginal_point_estimate(ra, rb, opt, nullptr);
    }
    std::sort(values.begin(), values.end());
    const auto pick = [&values](double q) {
      const double pos = q * double(values.size() - 1);
      const std::size_t i = std::size_t(pos);
      const double frac = pos - double(i);
      return i + 1 < values.size() ? values[i] * (1 - frac) + values[i + 1] * frac : values[i];
    };
    out.ci_low = std::min(pick(0.025), out.value);
    out.ci_high = std::max(pick(0.975), out.value);
  } else {
    out.ci_low = out.ci_high = out.value;
  }
  return out;
}

// Rate bound C_d max|a|^2 (n^{5d-1/2}/k)^{1/3} with C_d = d^{C d}.
struct RateBound {
  double value = 0;
  double log_value = 0;
  double constant = 1;  // the exponent constant C in C_d = d^{C d}
};

inline RateBound bound_poly_cuberoot(int n, double k, int d, double max_sq_coef, double C = 1.0) {
  if (n < 1 || k <= 0 || d < 1 || max_sq_coef <= 0)
    throw std::invalid_argument("bound_poly_cuberoot: bad parameters");
  RateBound out;
  out.constant = C;
  out.log_value = C * d * std::log(double(d)) + std::log(max_sq_coef) +
                  ((5.0 * d - 0.5) * std::log(double(n)) - std::log(k)) / 3.0;
  out.value = std::exp(out.log_value);
  return out;
}

// Rate bound C_d n^{5d/2 - 3/2}/k with C_d = d^{C d}; the quadratic case uses
// the sharp exponent 3, the best rate possible at d = 2.
inline RateBound bound_poly_sharp(int n, double k, int d, double C = 1.0) {
  if (n < 1 || k <= 0 || d < 1) throw std::invalid_argument("bound_poly_sharp: bad parameters");
  const double exponent = d == 2 ? 3.0 : 2.5 * d - 1.5;
  RateBound out;
  out.constant = C;
  out.log_value = C * d * std::log(double(d)) + exponent * std::log(double(n)) - std::log(k);
  out.value = std::exp(out.log_value);
  return out;
}

// General-activation bound: C' max|c|^2 / k^{1/6} plus the expansion tail at
// the degree d(k, n) = ceil(log k / (100 C' log n log log k)).
struct ActivationBound {
  double value = 0;
  double width_term = 0;
  double tail_term = 0;
  int degree = 0;
  double constant = 1;
};

template <typename RemainderFn>
ActivationBound bound_l2_activation(int n, double k, double max_sq_hermite,
                                    RemainderFn&& remainder_at, double Cprime = 1.0) {
  if (n < 2) throw std::invalid_argument("bound_l2_activation: need n >= 2");
  if (k < 16) throw std::invalid_argument("bound_l2_activation: need k >= 16");
  ActivationBound out;
  out.constant = Cprime;
  out.degree = std::max(
      1, int(std::ceil(std::log(k) / (100.0 * Cprime * std::log(double(n)) *
                                      std::log(std::log(k))))));
  out.width_term = Cprime * max_sq_hermite / std::pow(k, 1.0 / 6.0);
  out.tail_term = remainder_at(out.degree);
  out.value = out.width_term + out.tail_term;
  return out;
}

// CLT right-hand side for normalized sums of k i.i.d. isotropic vectors:
// (sqrt(dim)/k) ||E[Y Y^T |Y|^2]||_F, estimated from the given sample rows.
inline double isotropic_clt_rhs(const Eigen::Ref<const Eigen::MatrixXd>& y, double k) {
  if (y.rows() == 0 || k <= 0) throw std::invalid_argument("isotropic_clt_rhs: bad input");
  const Eigen::Index dim = y.cols();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index r = 0; r < y.rows(); ++r)
    m.selfadjointView<Eigen::Lower>().rankUpdate(y.row(r).transpose(), y.row(r).squaredNorm());
  m = Eigen::MatrixXd(m.selfadjointView<Eigen::Lower>()) / double(y.rows());
  return std::sqrt(double(dim)) * m.norm() / k;
}

}  // namespace gpll
