#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "gpll/hermite.hpp"
#include "gpll/quadrature.hpp"

namespace gpll {

enum class ActivationKind { relu, tanh, polynomial, tabulated };

// An activation on the real line. Polynomial activations carry monomial
// coefficients a_0..a_d; tabulated ones a strictly increasing grid with
// values, evaluated by linear interpolation and zero outside the grid.
struct Activation {
  ActivationKind kind;
  Eigen::VectorXd poly;
  Eigen::VectorXd grid, values;

  static Activation relu() { return {ActivationKind::relu, {}, {}, {}}; }
  static Activation tanh() { return {ActivationKind::tanh, {}, {}, {}}; }

  static Activation polynomial(Eigen::VectorXd coeffs) {
    if (coeffs.size() == 0) throw std::invalid_argument("polynomial activation: empty coefficients");
    if (coeffs.size() > 1 && coeffs[coeffs.size() - 1] == 0.0)
      throw std::invalid_argument("polynomial activation: leading coefficient must be nonzero");
    return {ActivationKind::polynomial, std::move(coeffs), {}, {}};
  }

  static Activation tabulated(Eigen::VectorXd grid, Eigen::VectorXd values) {
    if (grid.size() != values.size() || grid.size() < 2)
      throw std::invalid_argument("tabulated activation: need matching grid/values of length >= 2");
    for (Eigen::Index i = 1; i < grid.size(); ++i)
      if (!(grid[i] > grid[i - 1]))
        throw std::invalid_argument("tabulated activation: grid must be strictly increasing");
    return {ActivationKind::tabulated, {}, std::move(grid), std::move(values)};
  }

  double operator()(double x) const {
    switch (kind) {
      case ActivationKind::relu:
        return x > 0 ? x : 0.0;
      case ActivationKind::tanh:
        return std::tanh(x);
      case ActivationKind::polynomial: {
        double acc = 0;
        for (Eigen::Index i = poly.size() - 1; i >= 0; --i) acc = acc * x + poly[i];
        return acc;
      }
      case ActivationKind::tabulated: {
        if (x < grid[0] || x > grid[grid.size() - 1]) return 0.0;
        Eigen::Index lo = 0, hi = grid.size() - 1;
        while (hi - lo > 1) {
          const Eigen::Index mid = (lo + hi) / 2;
          (grid[mid] <= x ? lo : hi) = mid;
        }
        const double t = (x - grid[lo]) / (grid[lo + 1] - grid[lo]);
        return values[lo] + t * (values[lo + 1] - values[lo]);
      }
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case ActivationKind::relu: return "relu";
      case ActivationKind::tanh: return "tanh";
      case ActivationKind::polynomial: return "polynomial";
      case ActivationKind::tabulated: return "tabulated";
    }
    return "unknown";
  }
};

inline double double_factorial(int k) {
  if (k < -1) throw std::invalid_argument("double_factorial: argument below -1");
  double r = 1;
  for (; k > 1; k -= 2) r *= k;
  return r;
}

namespace detail {

// Half-range rules for integrals of the form int_0^inf f(x) phi(x) dx where f
// has a kink at 0. Substituting x = sqrt(2t) maps them to Gauss-Laguerre
// integrals that are exact when f(x)/x^{parity} is polynomial in x^2, which
// covers x*h_m(x) for every m. A plain Gaussian-weight rule converges only
// polynomially on such integrands, far too slowly for the coefficient
// audits, so the ReLU path must use these.
inline double relu_coefficient_quadrature(int m, int laguerre_order) {
  const double inv_sqrt_2pi = 0.3989422804014326779;
  if (m % 2 == 0) {
    // int_0^inf x h_m(x) phi dx = inv_sqrt_2pi * int_0^inf h_m(sqrt(2t)) e^-t dt
    const auto rule = gauss_laguerre_rule<double>(laguerre_order, 0.0);
    double acc = 0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
      acc += rule.weights[i] * hermite_eval(m, std::sqrt(2.0 * rule.nodes[i]));
    return inv_sqrt_2pi * acc;
  }
  // Odd m: h_m(x)/x is polynomial in x^2 = 2t; weight picks up t^{1/2}.
  const auto rule = gauss_laguerre_rule<double>(laguerre_order, 0.5);
  double acc = 0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    const double x = std::sqrt(2.0 * rule.nodes[i]);
    acc += rule.weights[i] * (hermite_eval(m, x) / x);
  }
  return std::sqrt(2.0) * inv_sqrt_2pi * acc;
}

inline int relu_laguerre_order(int m) { return std::max(48, m / 2 + 8); }

// Piecewise Gauss-Legendre against the Gaussian weight for tabulated
// activations: smooth on each grid cell, so a fixed-order panel rule is
// spectrally accurate.
template <typename F>
double cellwise_gaussian_integral(const Eigen::VectorXd& grid, F&& f, int panel_order) {
  const double inv_sqrt_2pi = 0.3989422804014326779;
  const auto base = gauss_legendre_rule<double>(panel_order);
  double acc = 0;
  for (Eigen::Index c = 0; c + 1 < grid.size(); ++c) {
    const double half = (grid[c + 1] - grid[c]) / 2, mid = (grid[c + 1] + grid[c]) / 2;
    double cell = 0;
    for (Eigen::Index i = 0; i < base.nodes.size(); ++i) {
      const double x = mid + half * base.nodes[i];
      cell += base.weights[i] * f(x) * std::exp(-0.5 * x * x);
    }
    acc += half * cell * inv_sqrt_2pi;
  }
  return acc;
}

// Gaussian mass outside [lo, hi].
inline double gaussian_tail_mass(double lo, double hi) {
  const double inv_sqrt2 = 0.7071067811865475244;
  return 0.5 * std::erfc(hi * inv_sqrt2) + 0.5 * std::erfc(-lo * inv_sqrt2);
}

inline void check_tabulated_tail(const Activation& act) {
  const double sup = act.values.cwiseAbs().maxCoeff();
  const double tail = sup * std::sqrt(gaussian_tail_mass(act.grid[0], act.grid[act.grid.size() - 1]));
  if (tail > 1e-10 * (1.0 + sup))
    throw std::domain_error(
        "tabulated activation: grid range leaves non-negligible Gaussian mass uncovered");
}

}  // namespace detail

// m-th coefficient of the activation in the normalized Hermite basis,
// sigma_hat_m = E[sigma(w) h_m(w)] for w standard normal. Deterministic for
// fixed quad_order. Smooth activations use a Gaussian-weight rule of the
// given order; the ReLU uses an exact half-range rule (see detail above)
// whose order scales with m; tabulated activations use cell-split panels.
inline double hermite_coefficient(const Activation& act, int m, int quad_order) {
  if (m < 0) throw std::invalid_argument("hermite_coefficient: negative degree");
  if (quad_order < 2 * m + 2)
    throw std::invalid_argument("hermite_coefficient: quad_order must be >= 2m+2");
  switch (act.kind) {
    case ActivationKind::relu:
      return detail::relu_coefficient_quadrature(m, detail::relu_laguerre_order(m));
    case ActivationKind::tabulated: {
      detail::check_tabulated_tail(act);
      return detail::cellwise_gaussian_integral(
          act.grid, [&](double x) { return act(x) * hermite_eval(m, x); }, 16);
    }
    default: {
      const auto rule = gauss_hermite_rule<double>(quad_order);
      double acc = 0;
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
        acc += rule.weights[i] * act(rule.nodes[i]) * hermite_eval(m, rule.nodes[i]);
      return acc;
    }
  }
}

// Squared L2 norm of the activation against the standard Gaussian.
inline double activation_l2_norm_sq(const Activation& act, int quad_order) {
  switch (act.kind) {
    case ActivationKind::relu: {
      // int_0^inf x^2 phi dx via the alpha = 1/2 half-range rule (exact).
      const auto rule = gauss_laguerre_rule<double>(32, 0.5);
      return std::sqrt(2.0) * 0.3989422804014326779 * rule.weights.sum();
    }
    case ActivationKind::tabulated: {
      detail::check_tabulated_tail(act);
      return detail::cellwise_gaussian_integral(
          act.grid, [&](double x) { const double v = act(x); return v * v; }, 16);
    }
    default: {
      const auto rule = gauss_hermite_rule<double>(quad_order);
      double acc = 0;
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
        const double v = act(rule.nodes[i]);
        acc += rule.weights[i] * v * v;
      }
      return acc;
    }
  }
}

// Series form for the ReLU coefficients under a normalization that differs
// from the L2(gamma) integral by a uniform factor sqrt(2) on even degrees:
// 1/sqrt(2) at m=1, 0 at odd m>1, (m-3)!!/(sqrt(pi) sqrt(m!)) at even m>=2.
// Retained verbatim so the coefficient table can audit the quadrature path
// by reporting the ratio; downstream computation always uses quadrature
// values. The series is undefined at m=0, where the integral value
// 1/sqrt(2*pi) is returned instead.
inline double relu_coefficient_closed_form(int m) {
  if (m < 0) throw std::invalid_argument("relu_coefficient_closed_form: negative degree");
  if (m == 0) return 0.3989422804014326779;
  if (m == 1) return 0.7071067811865475244;
  if (m % 2 == 1) return 0.0;
  // (m-3)!! / (sqrt(pi) sqrt(m!)) in log-domain; (m-3)!! = (m-2)!/(2^{(m-2)/2} ((m-2)/2)!)
  const int j = (m - 2) / 2;
  const double log_dfact = std::lgamma(m - 1.0) - j * std::log(2.0) - std::lgamma(j + 1.0);
  return std::exp(log_dfact - 0.5 * std::log(M_PI) - 0.5 * std::lgamma(m + 1.0));
}

// Hermite coefficients sigma_hat_0..sigma_hat_D plus the squared L2 norm.
struct HermiteExpansion {
  Eigen::VectorXd coefficients;
  double l2_norm_sq = 0;
  int quad_order = 0;

  int max_degree() const { return int(coefficients.size()) - 1; }
};

inline HermiteExpansion hermite_expansion(const Activation& act, int max_degree, int quad_order) {
  if (max_degree < 0) throw std::invalid_argument("hermite_expansion: negative max degree");
  HermiteExpansion e;
  e.coefficients.resize(max_degree + 1);
  e.quad_order = quad_order;
  if (act.kind == ActivationKind::relu || act.kind == ActivationKind::tabulated) {
    for (int m = 0; m <= max_degree; ++m) e.coefficients[m] = hermite_coefficient(act, m, quad_order);
  } else {
    if (quad_order < 2 * max_degree + 2)
      throw std::invalid_argument("hermite_expansion: quad_order must be >= 2*max_degree+2");
    const auto rule = gauss_hermite_rule<double>(quad_order);
    e.coefficients.setZero();
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
      const double wf = rule.weights[i] * act(rule.nodes[i]);
      e.coefficients += wf * hermite_eval_all(max_degree, rule.nodes[i]);
    }
  }
  e.l2_norm_sq = activation_l2_norm_sq(act, quad_order);
  return e;
}

// Remainder R_sigma(d) = l2_norm_sq - sum_{m<=d} sigma_hat_m^2, clamped at 0.
inline double remainder(const HermiteExpansion& e, int d) {
  if (d < 0 || d > e.max_degree())
    throw std::invalid_argument("remainder: degree outside expansion range");
  const double partial = e.coefficients.head(d + 1).squaredNorm();
  return std::max(0.0, e.l2_norm_sq - partial);
}

// Monomial coefficients of the degree-d Hermite truncation
// p_d = sum_{m<=d} sigma_hat_m h_m.
inline Eigen::VectorXd truncated_polynomial(const Activation& act, int d, int quad_order) {
  Eigen::VectorXd h(d + 1);
  for (int m = 0; m <= d; ++m) h[m] = hermite_coefficient(act, m, quad_order);
  return hermite_to_monomial<double>(h);
}

// Bound on the monomial coefficients of a Hermite truncation:
// |a_m| <= max|sigma_hat| * (2/sqrt(m!)) * 2^d.
inline double coefficient_bound_rhs(int d, int m, double max_hermite_coef) {
  if (m < 0 || m > d) throw std::invalid_argument("coefficient_bound_rhs: need 0 <= m <= d");
  return max_hermite_coef * 2.0 * std::exp(d * std::log(2.0) - 0.5 * std::lgamma(m + 1.0));
}

// Least-squares fit of log|c_m| = intercept - C*sqrt(m) over odd degrees with
// nonzero coefficients; decay-rate audit for smooth odd activations.
struct DecayFit {
  double C = 0;
  double intercept = 0;
  double residual = 0;   // RMS of fit residuals
  double r_squared = 0;
  int points = 0;
};

inline DecayFit tanh_decay_fit(int max_m, int quad_order) {
  if (max_m < 10) throw std::invalid_argument("tanh_decay_fit: max_m must be >= 10");
  const auto e = hermite_expansion(Activation::tanh(), max_m, quad_order);
  std::vector<double> xs, ys;
  for (int m = 1; m <= max_m; m += 2) {
    const double c = std::abs(e.coefficients[m]);
    if (c < 1e-280) continue;
    xs.push_back(std::sqrt(double(m)));
    ys.push_back(std::log(c));
  }
  const int n = int(xs.size());
  if (n < 4) throw std::invalid_argument("tanh_decay_fit: fewer than 4 nonzero coefficients");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) { sx += xs[i]; sy += ys[i]; sxx += xs[i] * xs[i]; sxy += xs[i] * ys[i]; }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  DecayFit fit;
  fit.intercept = (sy - slope * sx) / n;
  fit.C = -slope;
  fit.points = n;
  double ssr = 0, sst = 0;
  const double ybar = sy / n;
  for (int i = 0; i < n; ++i) {
    const double pred = fit.intercept + slope * xs[i];
    ssr += (ys[i] - pred) * (ys[i] - pred);
    sst += (ys[i] - ybar) * (ys[i] - ybar);
  }
  fit.residual = std::sqrt(ssr / n);
  fit.r_squared = sst > 0 ? 1.0 - ssr / sst : 1.0;
  return fit;
}

}  // namespace gpll
