#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace gpll {

template <typename Scalar = double>
struct QuadratureRule {
  Eigen::Vector<Scalar, Eigen::Dynamic> nodes;
  Eigen::Vector<Scalar, Eigen::Dynamic> weights;

  template <typename F>
  Scalar integrate(F&& f) const {
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

// Golub–Welsch: nodes are the eigenvalues of the symmetric tridiagonal Jacobi
// matrix. Weights come from the Christoffel identity w_i = 1/sum_j p_j(x_i)^2
// over the orthonormal polynomials (p_0 = 1/sqrt(mu0), mu0 the total mass of
// the weight function), evaluated by the three-term recurrence at each node.
// The textbook alternative — mu0 times the squared first components of the
// eigenvectors — carries only absolute eigenvector accuracy, which floors the
// far-tail weights at roughly eps^2 instead of their true exponentially small
// values and corrupts integrals of growing integrands (high-degree Hermite
// coefficients); the recurrence form keeps the tail weights relatively
// accurate. Running rescaling guards the p_j against overflow at large order.
template <typename Scalar>
QuadratureRule<Scalar> golub_welsch(const Eigen::Vector<Scalar, Eigen::Dynamic>& diag,
                                    const Eigen::Vector<Scalar, Eigen::Dynamic>& subdiag,
                                    Scalar mu0) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::SelfAdjointEigenSolver<Mat> es;
  es.computeFromTridiagonal(diag, subdiag, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("quadrature: tridiagonal eigensolve failed");
  QuadratureRule<Scalar> rule;
  rule.nodes = es.eigenvalues();
  const Eigen::Index n = diag.size();
  rule.weights.resize(n);
  const Scalar big = Scalar(1e150), shrink = Scalar(1e-150);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar x = rule.nodes[i];
    Scalar pm1 = 0, p = Scalar(1) / std::sqrt(mu0);
    Scalar sum = p * p;
    Scalar log_rescale = 0;
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
      const Scalar next =
          ((x - diag[j]) * p - (j > 0 ? subdiag[j - 1] : Scalar(0)) * pm1) / subdiag[j];
      pm1 = p;
      p = next;
      sum += p * p;
      if (std::abs(p) > big) {
        pm1 *= shrink;
        p *= shrink;
        sum *= shrink * shrink;
        log_rescale += std::log(big);
      }
    }
    rule.weights[i] = log_rescale == Scalar(0)
                          ? Scalar(1) / sum
                          : std::exp(-Scalar(2) * log_rescale - std::log(sum));
  }
  return rule;
}

// Weight e^{-x^2/2}/sqrt(2*pi) on the real line (standard Gaussian, unit mass).
// Exact for polynomials of degree <= 2*order - 1.
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_hermite_rule(int order) {
  if (order < 1) throw std::invalid_argument("gauss_hermite_rule: order must be >= 1");
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  Vec diag = Vec::Zero(order);
  Vec sub(order - 1 > 0 ? order - 1 : 0);
  for (int i = 1; i < order; ++i) sub[i - 1] = std::sqrt(Scalar(i));
  return golub_welsch<Scalar>(diag, sub, Scalar(1));
}

// Weight t^alpha e^{-t} on [0, inf), mass Gamma(alpha + 1).
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_laguerre_rule(int order, Scalar alpha = Scalar(0)) {
  if (order < 1) throw std::invalid_argument("gauss_laguerre_rule: order must be >= 1");
  if (alpha <= Scalar(-1)) throw std::invalid_argument("gauss_laguerre_rule: alpha must exceed -1");
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  Vec diag(order), sub(order - 1 > 0 ? order - 1 : 0);
  for (int i = 0; i < order; ++i) diag[i] = 2 * Scalar(i) + alpha + 1;
  for (int i = 1; i < order; ++i) sub[i - 1] = std::sqrt(Scalar(i) * (Scalar(i) + alpha));
  return golub_welsch<Scalar>(diag, sub, Scalar(std::tgamma(double(alpha + 1))));
}

// Weight 1 on [lo, hi].
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_legendre_rule(int order, Scalar lo = Scalar(-1), Scalar hi = Scalar(1)) {
  if (order < 1) throw std::invalid_argument("gauss_legendre_rule: order must be >= 1");
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  Vec diag = Vec::Zero(order);
  Vec sub(order - 1 > 0 ? order - 1 : 0);
  for (int i = 1; i < order; ++i)
    sub[i - 1] = Scalar(i) / std::sqrt(Scalar(4) * Scalar(i) * Scalar(i) - 1);
  QuadratureRule<Scalar> rule = golub_welsch<Scalar>(diag, sub, Scalar(2));
  const Scalar half = (hi - lo) / 2, mid = (hi + lo) / 2;
  rule.nodes = (rule.nodes.array() * half + mid).matrix();
  rule.weights *= half;
  return rule;
}

}  // namespace gpll
