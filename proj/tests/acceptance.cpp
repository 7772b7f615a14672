// Acceptance gate: end-to-end checks with fixed seeds and stated tolerances.
// Prints one [PASS]/[FAIL] line per criterion; exit code is the failure count.
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gpll/harness.hpp"
#include "gpll/hermite.hpp"
#include "gpll/quadrature.hpp"

using namespace gpll;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Eigen::VectorXd random_unit(CounterRng& rng, int n) {
  Eigen::VectorXd x(n);
  double nsq = 0;
  while (nsq == 0) {
    for (int i = 0; i < n; ++i) x[i] = rng.gaussian();
    nsq = x.squaredNorm();
  }
  return x / std::sqrt(nsq);
}

double horner(const std::vector<double>& poly, double t) {
  double v = 0;
  for (auto it = poly.rbegin(); it != poly.rend(); ++it) v = v * t + *it;
  return v;
}

Outcome kernel_identity() {
  CounterRng rng(0xC1, 0x616363);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 5;
    const int d = 1 + t % 4;
    std::vector<double> poly(std::size_t(d) + 1);
    for (auto& a : poly) a = 2.0 * rng.uniform01() - 1.0;
    const auto basis = make_feature_basis(n, d);
    for (int pair = 0; pair < 200; ++pair) {
      const Eigen::VectorXd x = random_unit(rng, n);
      const Eigen::VectorXd y = random_unit(rng, n);
      const auto px = embed_point(x, poly, basis);
      const auto py = embed_point(y, poly, basis);
      worst = std::max(worst, std::abs(q_form(px, py, poly) - horner(poly, x.dot(y))));
    }
  }
  return {worst <= 1e-10, "max |Q(P(x),P(y)) - p(x.y)| = " + num(worst) + " (tol 1e-10)"};
}

Outcome variance_methods_agree() {
  CounterRng rng(0xC2, 0x616363);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t % 4;
    const int d = 1 + (t / 4) % 4;
    PolyMap q;
    for (int j = 1; j <= d; ++j)
      for (const auto& I : multi_indices(n, j)) q[I] = 2.0 * rng.uniform01() - 1.0;
    const double a = polynomial_variance_moments(q);
    const double b = polynomial_variance_derivative_expansion(q);
    worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
  }
  return {worst <= 1e-9, "max relative gap = " + num(worst) + " (tol 1e-9)"};
}

Outcome covariance_bounds() {
  double worst_ratio = 0;  // opnorm / upper bound, want <= 1
  for (int n = 2; n <= 6; ++n) {
    for (int d = 1; d <= 4; ++d) {
      CounterRng rng(derive_seed(0xC3, std::uint64_t(n * 16 + d)), 0x616363);
      std::vector<std::vector<double>> polys;
      std::vector<double> mono(std::size_t(d) + 1, 0.0);
      mono.back() = 1.0;
      polys.push_back(mono);
      std::vector<double> rand_poly(std::size_t(d) + 1);
      for (auto& a : rand_poly) a = 2.0 * rng.uniform01() - 1.0;
      if (std::abs(rand_poly.back()) < 0.1) rand_poly.back() = 0.5;
      polys.push_back(rand_poly);
      for (const auto& poly : polys) {
        double max_abs = 0;
        for (double a : poly) max_abs = std::max(max_abs, std::abs(a));
        const auto sp = spectrum(covariance_analytic(poly, n));
        const double opnorm = sp.eigenvalues.cwiseAbs().maxCoeff();
        worst_ratio = std::max(worst_ratio, opnorm / sigma_upper_bound_rhs(d, n, max_abs).value);
      }
    }
  }

  double worst_floor = std::numeric_limits<double>::infinity();  // min_var * d!, want >= 1
  for (int d = 1; d <= 4; ++d) {
    CounterRng rng(derive_seed(0xC3, 0x100 + std::uint64_t(d)), 0x616363);
    double min_var = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 500; ++t)
      min_var = std::min(min_var, polynomial_variance_moments(detail::random_homogeneous_unit(5, d, rng)));
    double fact = 1;
    for (int j = 2; j <= d; ++j) fact *= j;
    worst_floor = std::min(worst_floor, min_var * fact);
  }

  double worst_quad = 0;
  for (int n = 1; n <= 16; ++n) worst_quad = std::max(worst_quad, quadratic_opnorm_audit(n));

  const bool pass = worst_ratio <= 1.0 && worst_floor >= 1.0 - 1e-9 && worst_quad <= 3.0;
  return {pass, "opnorm/bound max = " + num(worst_ratio) + ", min Var*d! = " + num(worst_floor) +
                    ", quadratic opnorm max = " + num(worst_quad) + " (need <=1, >=1, <=3)"};
}

Outcome sharpness_slopes() {
  double slopes[2];
  for (int l : {2, 3}) {
    std::vector<std::pair<double, double>> pts;
    for (int n = 4; n <= 12; ++n)
      pts.emplace_back(double(n), polynomial_variance_moments(sharpness_polynomial(n, l)));
    slopes[l - 2] = fit_loglog_slope(pts).slope;
  }
  const bool pass = std::abs(slopes[0] - 1.0) <= 0.1 && std::abs(slopes[1] - 2.0) <= 0.1;
  return {pass, "slope(l=2) = " + num(slopes[0]) + " vs 1, slope(l=3) = " + num(slopes[1]) +
                    " vs 2 (tol 0.1)"};
}

Outcome hermite_suite() {
  const auto rule = gauss_hermite_rule(64);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(13, 13);
  for (Eigen::Index t = 0; t < rule.nodes.size(); ++t) {
    const Eigen::VectorXd h = hermite_eval_all(12, rule.nodes[t]);
    gram += rule.weights[t] * h * h.transpose();
  }
  const double ortho_err = (gram - Eigen::MatrixXd::Identity(13, 13)).cwiseAbs().maxCoeff();

  const Activation relu = Activation::relu();
  double odd_max = 0;
  for (int m = 3; m <= 39; m += 2)
    odd_max = std::max(odd_max, std::abs(hermite_coefficient(relu, m, 128)));

  double ratio_min = std::numeric_limits<double>::infinity(), ratio_max = 0;
  for (int m = 2; m <= 40; m += 2) {
    const double r =
        std::abs(relu_coefficient_closed_form(m)) / std::abs(hermite_coefficient(relu, m, 128));
    ratio_min = std::min(ratio_min, r);
    ratio_max = std::max(ratio_max, r);
  }
  const double ratio_spread = ratio_max - ratio_min;

  const auto expansion = hermite_expansion(relu, 30, 128);
  double tail_margin = std::numeric_limits<double>::infinity();  // 1/d^2 - R(d), want >= 0
  for (int d = 2; d <= 30; ++d)
    tail_margin = std::min(tail_margin, 1.0 / double(d * d) - remainder(expansion, d));

  const double r2 = tanh_decay_fit(40, 256).r_squared;

  const bool pass = ortho_err <= 1e-10 && odd_max <= 1e-13 && ratio_spread <= 1e-6 &&
                    tail_margin >= 0 && r2 >= 0.95;
  return {pass, "ortho err = " + num(ortho_err) + ", odd coeff max = " + num(odd_max) +
                    ", ratio spread = " + num(ratio_spread) + ", tail margin = " +
                    num(tail_margin) + ", tanh r2 = " + num(r2)};
}

Outcome coupled_truncation() {
  const Activation relu = Activation::relu();
  const auto expansion = hermite_expansion(relu, 8, 128);
  const auto points = sphere_sample(4, 3, 0xC6);
  double worst_z = 0;
  std::string parts;
  for (int d : {2, 4, 8}) {
    const Activation trunc = Activation::polynomial(truncated_polynomial(relu, d, 128));
    const auto est = coupled_l2_discrepancy(relu, trunc, 32, points, 10000, derive_seed(0xC6, d));
    const double target = remainder(expansion, d);
    const double z = std::abs(est.value - target) / est.stderr_value;
    worst_z = std::max(worst_z, z);
    parts += (parts.empty() ? "" : ", ") + std::string("d=") + std::to_string(d) + " z=" + num(z);
  }
  return {worst_z <= 3.0, parts + " (need <= 3 stderr)"};
}

Outcome finite_width_covariance() {
  Eigen::VectorXd sq(3);
  sq << 0, 0, 1;
  const Activation act = Activation::polynomial(sq);
  const auto expansion = hermite_expansion(act, 2, 32);
  const auto points = sphere_sample(3, 5, 0xC7);
  const auto kernel = nngp_kernel(expansion, points);
  const auto sample = sample_marginal(16, act, points, 10000, derive_seed(0xC7, 9));
  const double reps = double(sample.table.rows());

  double worst_z = 0;
  for (Eigen::Index a = 0; a < 5; ++a) {
    for (Eigen::Index b = a; b < 5; ++b) {
      const Eigen::ArrayXd z = sample.table.col(a).array() * sample.table.col(b).array();
      const double mean = z.mean();
      const double sd = std::sqrt((z - mean).square().sum() / (reps - 1));
      worst_z = std::max(worst_z, std::abs(mean - kernel.matrix(a, b)) / (sd / std::sqrt(reps)));
    }
  }
  return {worst_z <= 5.0, "max |emp - kernel| z-score = " + num(worst_z) + " (need <= 5)"};
}

Outcome width_rate_experiment() {
  ExperimentConfig cfg;
  cfg.activation_spec = "poly:0,0,1";
  cfg.n = 3;
  cfg.points = 5;
  cfg.reps = 512;
  cfg.k_grid = {16, 64, 256, 1024, 4096};
  cfg.seed = 0xACCE55;
  cfg.estimator = "assignment";
  cfg.bootstrap = 24;
  cfg.constant_c = 1.0;
  const auto res = run_rate_experiment(cfg);

  std::string ests;
  int separated = 0, bound_ok = 0, clean = 0;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& row = res.rows[i];
    if (row.error.empty()) ++clean;
    if (row.pass_bound) ++bound_ok;
    if (i + 1 < res.rows.size() &&
        res.rows[i + 1].estimate.ci_high < res.rows[i].estimate.ci_low)
      ++separated;
    ests += (ests.empty() ? "" : ",") + num(row.estimate.value);
  }
  const double slope = res.fit_valid ? res.fit.slope : std::numeric_limits<double>::quiet_NaN();
  const bool pass = clean == 5 && separated == 4 && res.fit_valid && slope <= -0.3 && bound_ok == 5;
  return {pass, "estimates = [" + ests + "], adjacent CI separations = " +
                    std::to_string(separated) + "/4, slope = " + num(slope) +
                    " (need <= -0.3), bound satisfied = " + std::to_string(bound_ok) + "/5"};
}

Outcome gaussian_transport_oracle() {
  const int N = 2048, m = 3;
  Eigen::MatrixXd a(N, m), b(N, m);
  CounterRng ra(0xC9A, 0x616363), rb(0xC9B, 0x616363);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < m; ++j) {
      a(i, j) = ra.gaussian();
      b(i, j) = 2.0 * rb.gaussian();
    }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
  const double closed = w2_gaussian(zero, eye, zero, 4.0 * eye).value;
  const double exact = w2_exact(a, b).value;
  const double sink = sinkhorn_divergence(a, b).value;
  const bool pass = std::abs(exact - closed) <= 0.1 * closed && std::abs(sink - closed) <= 0.1 * closed;
  return {pass, "closed form = " + num(closed) + ", assignment = " + num(exact) +
                    ", sinkhorn = " + num(sink) + " (tol 10%)"};
}

std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome reproducible_cli() {
  const char* cli = std::getenv("GPLL_CLI_PATH");
  if (cli == nullptr || *cli == '\0') return {false, "GPLL_CLI_PATH not set"};
  const fs::path root = "acceptance_cli_runs";
  fs::remove_all(root);
  fs::create_directories(root);

  const auto run = [&](const std::string& args) {
    const std::string cmd = std::string("\"") + cli + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  const auto out = [&](const char* dir) { return (root / dir).string(); };

  const std::string coeffs_args = "coeffs --activation relu --dmax 24 --out ";
  const std::string sample_args =
      "sample --activation poly:0,0,1 --n 3 --k 32 --points 3 --reps 200 --seed 99 --out ";
  if (!run(coeffs_args + out("c1")) || !run(coeffs_args + out("c2")))
    return {false, "coeffs run failed"};
  if (!run(sample_args + out("s1")) || !run(sample_args + out("s2")))
    return {false, "sample run failed"};
  if (!run("sample --activation poly:0,0,1 --n 3 --k 32 --points 3 --reps 200 --seed 100 --out " +
           out("s3")))
    return {false, "sample run failed"};
  const std::string dist_args = "distance --a " + out("s1") + "/marginals.csv --b " + out("s3") +
                                "/marginals.csv --method exact --seed 7 --out ";
  if (!run(dist_args + out("d1")) || !run(dist_args + out("d2")))
    return {false, "distance run failed"};

  const std::vector<std::pair<std::pair<const char*, const char*>, std::vector<const char*>>>
      groups = {
          {{"c1", "c2"}, {"coeffs.csv", "coeffs_table.csv", "resolved_config.json"}},
          {{"s1", "s2"}, {"marginals.csv", "marginals_sidecar.csv", "resolved_config.json"}},
          {{"d1", "d2"}, {"estimate.json", "resolved_config.json"}},
      };
  int compared = 0;
  for (const auto& [dirs, files] : groups) {
    for (const char* file : files) {
      const auto lhs = read_file(root / dirs.first / file);
      const auto rhs = read_file(root / dirs.second / file);
      if (!lhs || !rhs) return {false, std::string("missing output ") + file};
      if (*lhs != *rhs)
        return {false, std::string(file) + " differs between identical runs"};
      ++compared;
    }
  }
  return {true, std::to_string(compared) + " output files bit-identical across rerun pairs"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;  // 0 = no stated budget
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"kernel-identity", 5, kernel_identity},
      {"variance-methods-agree", 30, variance_methods_agree},
      {"covariance-bounds", 120, covariance_bounds},
      {"sharpness-slopes", 0, sharpness_slopes},
      {"hermite-suite", 60, hermite_suite},
      {"coupled-truncation", 120, coupled_truncation},
      {"finite-width-covariance", 0, finite_width_covariance},
      {"width-rate-experiment", 600, width_rate_experiment},
      {"gaussian-transport-oracle", 0, gaussian_transport_oracle},
      {"reproducible-cli", 0, reproducible_cli},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool within = c.budget_seconds <= 0 || elapsed < c.budget_seconds;
    const bool pass = o.pass && within;
    std::printf("[%s] %2zu %-26s (%.1fs%s) %s\n", pass ? "PASS" : "FAIL", i + 1, c.name, elapsed,
                within ? "" : ", over budget", o.detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", criteria.size() - std::size_t(failures),
              criteria.size());
  return failures;
}
