#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gpll/activation.hpp"
#include "gpll/config.hpp"
#include "gpll/feature.hpp"
#include "gpll/process.hpp"
#include "gpll/transport.hpp"

namespace gpll {

struct RateFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  int points_used = 0;
};

// Ordinary least squares of log(value) on log(k).
inline RateFit fit_loglog_slope(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 4) throw std::invalid_argument("fit_loglog_slope: need at least 4 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const auto& [k, v] : pairs) {
    if (k <= 0 || v <= 0) throw std::invalid_argument("fit_loglog_slope: nonpositive point");
    const double x = std::log(k), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double n = double(pairs.size());
  const double den = n * sxx - sx * sx;
  if (den == 0) throw std::invalid_argument("fit_loglog_slope: degenerate abscissae");
  RateFit fit;
  fit.points_used = int(pairs.size());
  fit.slope = (n * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ssr = 0;
  const double mean_y = sy / n;
  double sst = 0;
  for (const auto& [k, v] : pairs) {
    const double r = std::log(v) - (fit.intercept + fit.slope * std::log(k));
    ssr += r * r;
    const double c = std::log(v) - mean_y;
    sst += c * c;
  }
  fit.r_squared = sst == 0 ? 1.0 : 1.0 - ssr / sst;
  return fit;
}

// Activation specs: "relu", "tanh", "identity", or "poly:a0,a1,...".
inline Activation parse_activation(const std::string& spec) {
  if (spec == "relu") return Activation::relu();
  if (spec == "tanh") return Activation::tanh();
  if (spec == "identity") {
    Eigen::VectorXd id(2);
    id << 0.0, 1.0;
    return Activation::polynomial(std::move(id));
  }
  const std::string poly_prefix = "poly:";
  if (spec.rfind(poly_prefix, 0) == 0) {
    const auto coeffs = parse_real_list(spec.substr(poly_prefix.size()));
    if (coeffs.empty()) throw std::invalid_argument("parse_activation: empty polynomial");
    return Activation::polynomial(
        Eigen::Map<const Eigen::VectorXd>(coeffs.data(), Eigen::Index(coeffs.size())));
  }
  throw std::invalid_argument("parse_activation: unknown spec '" + spec + "'");
}

struct ExperimentConfig {
  std::string activation_spec = "poly:0,0,1";
  int n = 3;
  int points = 5;
  std::int64_t reps = 512;  // sample size per side at the base scale
  std::vector<double> k_grid;
  std::uint64_t seed = 0;
  std::string estimator = "assignment";  // assignment | sinkhorn
  int bootstrap = 24;
  double eps = -1.0;
  int max_iters = 2000;
  double constant_c = 1.0;
  double constant_cprime = 1.0;
  int quad_order = 128;
  int kernel_degree = 40;
  std::int64_t audit_vectors = 500;
  Eigen::Index dense_cap = 4000;
  std::size_t index_cap = 2000000;
};

inline ExperimentConfig make_experiment_config(const Config& cfg) {
  ExperimentConfig e;
  e.activation_spec = cfg.get("activation", e.activation_spec);
  parse_activation(e.activation_spec);  // validate early
  e.n = int(cfg.get_int("n", e.n));
  e.points = int(cfg.get_int("points", e.points));
  e.reps = cfg.get_int("reps", e.reps);
  if (cfg.has("kgrid")) e.k_grid = parse_real_list(cfg.require("kgrid"));
  e.seed = std::uint64_t(cfg.get_int("seed", -1));
  if (!cfg.has("seed")) throw std::invalid_argument("config: 'seed' must be explicit");
  e.estimator = cfg.get("estimator", e.estimator);
  if (e.estimator != "assignment" && e.estimator != "sinkhorn")
    throw std::invalid_argument("config: estimator must be assignment or sinkhorn");
  e.bootstrap = int(cfg.get_int("bootstrap", e.bootstrap));
  e.eps = cfg.get_real("eps", e.eps);
  e.max_iters = int(cfg.get_int("max_iters", e.max_iters));
  e.constant_c = cfg.get_real("C", e.constant_c);
  e.constant_cprime = cfg.get_real("Cprime", e.constant_cprime);
  e.quad_order = int(cfg.get_int("quad_order", e.quad_order));
  e.kernel_degree = int(cfg.get_int("kernel_degree", e.kernel_degree));
  e.audit_vectors = cfg.get_int("audit_vectors", e.audit_vectors);
  e.dense_cap = Eigen::Index(cfg.get_int("dense_cap", e.dense_cap));
  e.index_cap = std::size_t(cfg.get_int("index_cap", std::int64_t(e.index_cap)));
  if (e.n < 2) throw std::invalid_argument("config: need n >= 2");
  if (e.points < 1 || e.reps < 1) throw std::invalid_argument("config: need points, reps >= 1");
  for (std::size_t i = 0; i + 1 < e.k_grid.size(); ++i)
    if (!(e.k_grid[i] < e.k_grid[i + 1]))
      throw std::invalid_argument("config: kgrid must be strictly increasing");
  return e;
}

struct RateRow {
  double k = 0;
  TransportEstimate estimate;
  double estimate_2n = 0;
  double bound = 0;
  bool pass_bound = false;
  std::string error;
};

struct RateResult {
  std::vector<RateRow> rows;
  RateFit fit;
  bool fit_valid = false;
};

// For each k: sample the width-k network marginal and the limiting Gaussian
// marginal at shared points, estimate their squared transport distance at
// sample sizes N and 2N, and compare with the applicable rate bound.
inline RateResult run_rate_experiment(const ExperimentConfig& cfg) {
  if (cfg.k_grid.empty()) throw std::invalid_argument("run_rate_experiment: empty k grid");
  const Activation act = parse_activation(cfg.activation_spec);
  const bool is_poly = act.kind == ActivationKind::polynomial;
  const int expansion_degree = is_poly ? int(act.poly.size()) - 1 : cfg.kernel_degree;
  const HermiteExpansion expansion = hermite_expansion(
      act, expansion_degree, std::max(cfg.quad_order, 2 * expansion_degree + 2));
  const Eigen::MatrixXd points = sphere_sample(cfg.n, cfg.points, derive_seed(cfg.seed, 1));
  const KernelMatrix kernel = nngp_kernel(expansion, points);

  const double max_sq = is_poly ? act.poly.cwiseAbs2().maxCoeff()
                                : expansion.coefficients.cwiseAbs2().maxCoeff();

  RateResult out;
  std::vector<std::pair<double, double>> fit_points;
  for (std::size_t i = 0; i < cfg.k_grid.size(); ++i) {
    RateRow row;
    row.k = cfg.k_grid[i];
    try {
      const auto k = std::int64_t(row.k);
      if (k < 1 || double(k) != row.k)
        throw std::invalid_argument("k grid entries must be positive integers");
      MarginalTransportOptions opt;
      opt.estimator = cfg.estimator == "sinkhorn" ? TransportEstimator::sinkhorn
                                                  : TransportEstimator::assignment;
      opt.auto_estimator = true;
      opt.eps = cfg.eps;
      opt.max_iters = cfg.max_iters;
      opt.bootstrap = cfg.bootstrap;
      opt.seed = derive_seed(cfg.seed, 0x600 + i);

      const auto net = sample_marginal(k, act, points, cfg.reps, derive_seed(cfg.seed, 0x200 + i));
      auto gp = sample_gp_marginal(kernel, cfg.reps, derive_seed(cfg.seed, 0x300 + i));
      gp.sample.points = points;
      row.estimate = marginal_transport_estimate(net, gp.sample, opt);

      const auto net2 =
          sample_marginal(k, act, points, 2 * cfg.reps, derive_seed(cfg.seed, 0x400 + i));
      auto gp2 = sample_gp_marginal(kernel, 2 * cfg.reps, derive_seed(cfg.seed, 0x500 + i));
      gp2.sample.points = points;
      MarginalTransportOptions opt2 = opt;
      opt2.bootstrap = std::max(0, cfg.bootstrap / 4);
      opt2.seed = derive_seed(cfg.seed, 0x700 + i);
      row.estimate_2n = marginal_transport_estimate(net2, gp2.sample, opt2).value;

      if (is_poly) {
        row.bound = bound_poly_sharp(cfg.n, row.k, expansion_degree, cfg.constant_c).value;
      } else if (row.k >= 16) {
        row.bound = bound_l2_activation(
                        cfg.n, row.k, max_sq,
                        [&](int d) { return remainder(expansion, std::min(d, expansion_degree)); },
                        cfg.constant_cprime)
                        .value;
      } else {
        row.bound = std::numeric_limits<double>::quiet_NaN();
      }
      row.pass_bound = !(row.estimate.value > row.bound);  // NaN bound counts as not failed
      if (row.estimate.value > 0) fit_points.emplace_back(row.k, row.estimate.value);
    } catch (const std::exception& ex) {
      row.error = ex.what();
      row.estimate.value = std::numeric_limits<double>::quiet_NaN();
      row.estimate_2n = std::numeric_limits<double>::quiet_NaN();
      row.bound = std::numeric_limits<double>::quiet_NaN();
    }
    out.rows.push_back(std::move(row));
  }
  if (fit_points.size() >= 4) {
    out.fit = fit_loglog_slope(fit_points);
    out.fit_valid = true;
  }
  return out;
}

struct AuditRow {
  std::string name;
  double lhs = 0;
  double rhs = 0;
  bool pass = false;
  bool asserted = true;
  std::string note;
};

struct AuditResult {
  std::vector<AuditRow> rows;
  int failures = 0;  // asserted rows that failed
};

namespace detail {

inline PolyMap random_homogeneous_unit(int n, int d, CounterRng& rng) {
  const auto indices = multi_indices(n, d);
  Eigen::VectorXd v(Eigen::Index(indices.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.gaussian();
  v /= v.norm();
  PolyMap q;
  for (std::size_t i = 0; i < indices.size(); ++i) q[indices[i]] = v[Eigen::Index(i)];
  return q;
}

inline double level_block_min_eigenvalue(const CovarianceOperator& cov, int level) {
  const Eigen::Index lo = cov.basis.level_offset[std::size_t(level)];
  const Eigen::Index len = cov.basis.level_offset[std::size_t(level) + 1] - lo;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.matrix.block(lo, lo, len, len));
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

// Inequality audits at desk scale: operator-norm bounds, variance lower
// bounds, dimension-free quadratic case, and the sharpness slope check.
// Asserted rows gate the exit status; reported rows are informational.
inline AuditResult run_bound_audit(const ExperimentConfig& cfg) {
  AuditResult out;
  const auto push = [&out](AuditRow row) {
    if (row.asserted && !row.pass) ++out.failures;
    out.rows.push_back(std::move(row));
  };

  for (int n : {2, 4, 8}) {
    AuditRow row;
    row.name = "opnorm_quadratic_n" + std::to_string(n);
    row.lhs = quadratic_opnorm_audit(n, cfg.dense_cap);
    row.rhs = 3.0;
    row.pass = row.lhs <= row.rhs;
    row.note = "dimension-free operator norm, p(x)=x^2";
    push(std::move(row));
  }
  {
    const double v4 = quadratic_opnorm_audit(4, cfg.dense_cap);
    const double v8 = quadratic_opnorm_audit(8, cfg.dense_cap);
    AuditRow row;
    row.name = "opnorm_quadratic_n8_vs_n4";
    row.lhs = std::abs(v8 - v4);
    row.rhs = 0.1 * v4;
    row.pass = row.lhs <= row.rhs;
    row.note = "dimension-freeness: n=8 within 10% of n=4";
    push(std::move(row));
  }

  for (int n = 2; n <= 6; ++n) {
    for (int d = 1; d <= 4; ++d) {
      CounterRng rng(derive_seed(cfg.seed, 0x1000 + std::uint64_t(n * 16 + d)), 0x61756431);
      std::vector<double> poly(std::size_t(d) + 1);
      double max_abs = 0;
      for (auto& a : poly) {
        a = 2.0 * rng.uniform01() - 1.0;
        max_abs = std::max(max_abs, std::abs(a));
      }
      if (std::abs(poly.back()) < 0.1) poly.back() = poly.back() < 0 ? -0.5 : 0.5;
      max_abs = std::max(max_abs, std::abs(poly.back()));
      const auto cov = covariance_analytic(poly, n, cfg.dense_cap);
      const auto sp = spectrum(cov);
      AuditRow row;
      row.name = "opnorm_upper_n" + std::to_string(n) + "_d" + std::to_string(d);
      row.lhs = sp.eigenvalues.cwiseAbs().maxCoeff();
      row.rhs = sigma_upper_bound_rhs(d, n, max_abs).value;
      row.pass = row.lhs <= row.rhs;
      row.note = "operator norm vs (4d)! max|a| n^{(d-1)/2}, random polynomial";
      push(std::move(row));
    }
  }

  for (int d = 1; d <= 4; ++d) {
    const int n = 5;
    CounterRng rng(derive_seed(cfg.seed, 0x2000 + std::uint64_t(d)), 0x61756432);
    const std::int64_t count = std::max<std::int64_t>(1, cfg.audit_vectors / 4);
    double min_var = std::numeric_limits<double>::infinity();
    for (std::int64_t t = 0; t < count; ++t) {
      const PolyMap q = detail::random_homogeneous_unit(n, d, rng);
      min_var = std::min(min_var, polynomial_variance_moments(q));
    }
    AuditRow row;
    row.name = "variance_lower_d" + std::to_string(d);
    row.lhs = min_var;
    row.rhs = std::exp(-std::lgamma(d + 1.0));
    // attained with equality at d = 1, so tolerate roundoff at the boundary
    row.pass = min_var >= row.rhs * (1.0 - 1e-12);
    row.note = "min Var(q(w)) over " + std::to_string(count) +
               " random unit homogeneous coefficient vectors, n=5";
    push(std::move(row));

    std::vector<double> monomial(std::size_t(d) + 1, 0.0);
    monomial.back() = 1.0;
    const auto cov = covariance_analytic(monomial, n, cfg.dense_cap);
    AuditRow lam;
    lam.name = "lambda_min_weighted_d" + std::to_string(d);
    lam.lhs = detail::level_block_min_eigenvalue(cov, d);
    lam.rhs = std::exp(-std::lgamma(d + 1.0));
    lam.pass = true;
    lam.asserted = false;
    lam.note = "reported only: weighted-basis top-level block minimum eigenvalue";
    push(std::move(lam));
  }

  for (int l : {2, 3}) {
    std::vector<std::pair<double, double>> pts;
    for (int n = 4; n <= 12; ++n)
      pts.emplace_back(double(n), polynomial_variance_moments(sharpness_polynomial(n, l)));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [n, v] : pts) {
      const double x = std::log(n), y = std::log(v);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = double(pts.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    AuditRow row;
    row.name = "sharpness_slope_l" + std::to_string(l);
    row.lhs = slope;
    row.rhs = double(l - 1);
    row.pass = std::abs(slope - row.rhs) <= 0.1;
    row.note = "log-log slope of Var vs n over n=4..12, target l-1 within 0.1";
    push(std::move(row));
  }

  return out;
}

struct CoefficientRow {
  int m = 0;
  double quadrature = 0;
  bool has_closed_form = false;
  double closed_form = 0;
  bool has_ratio = false;
  double ratio = 0;  // |closed form| / |quadrature|
  double remainder_after = 0;
};

// Per-degree coefficient table: quadrature value, closed form where one
// exists, their magnitude ratio, and the cumulative tail energy.
inline std::vector<CoefficientRow> run_coefficient_table(const Activation& act, int dmax,
                                                         int quad_order) {
  if (dmax < 0 || dmax > 200) throw std::invalid_argument("run_coefficient_table: need dmax in 0..200");
  const HermiteExpansion expansion =
      hermite_expansion(act, dmax, std::max(quad_order, 2 * dmax + 2));
  std::vector<CoefficientRow> rows;
  rows.reserve(std::size_t(dmax) + 1);
  for (int m = 0; m <= dmax; ++m) {
    CoefficientRow row;
    row.m = m;
    row.quadrature = expansion.coefficients[std::size_t(m)];
    if (act.kind == ActivationKind::relu) {
      row.has_closed_form = true;
      row.closed_form = relu_coefficient_closed_form(m);
      if (std::abs(row.quadrature) >= 1e-12) {
        row.has_ratio = true;
        row.ratio = std::abs(row.closed_form) / std::abs(row.quadrature);
      }
    }
    row.remainder_after = remainder(expansion, m);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gpll
