#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "gpll/config.hpp"
#include "gpll/harness.hpp"

namespace fs = std::filesystem;
using gpll::Config;
using gpll::format_real;
using ordered_json = nlohmann::ordered_json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed = -1;
  bool seed_set = false;
};

// Resolve a subcommand's settings: config file first, explicit flag
// overrides second. The resolved map is what gets hashed and exported.
Config resolve_config(const CommonArgs& common,
                      const std::map<std::string, std::string>& overrides) {
  Config cfg;
  if (!common.config_path.empty()) cfg = gpll::load_config(common.config_path);
  for (const auto& [k, v] : overrides) cfg.values[k] = v;
  if (common.seed_set) cfg.values["seed"] = std::to_string(common.seed);
  return cfg;
}

Eigen::Index env_dim_cap(Eigen::Index fallback) {
  const char* v = std::getenv("GPLL_MAX_DIM");
  if (v == nullptr || *v == '\0') return fallback;
  return Eigen::Index(std::strtoll(v, nullptr, 10));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
}

void export_resolved_config(const Config& cfg, const fs::path& dir, const std::string& name) {
  ordered_json j;
  for (const auto& [k, v] : cfg.values) j[k] = v;
  j["config_hash"] = gpll::config_hash_hex(cfg);
  write_text(dir / name, j.dump(2) + "\n");
}

int run_coeffs(const CommonArgs& common, const std::map<std::string, std::string>& overrides) {
  const Config cfg = resolve_config(common, overrides);
  const auto act = gpll::parse_activation(cfg.get("activation", "relu"));
  const int dmax = int(cfg.get_int("dmax", 40));
  const int quad_order = int(cfg.get_int("quad_order", 128));
  const auto rows = gpll::run_coefficient_table(act, dmax, quad_order);

  fs::create_directories(common.out_dir);
  gpll::CsvWriter csv({"m", "coefficient", "method", "remainder_after_m"});
  for (const auto& row : rows)
    csv.add_row({std::to_string(row.m), format_real(row.quadrature), "quadrature",
                 format_real(row.remainder_after)});
  for (const auto& row : rows)
    if (row.has_closed_form)
      csv.add_row({std::to_string(row.m), format_real(row.closed_form), "closed_form",
                   format_real(row.remainder_after)});
  csv.save((fs::path(common.out_dir) / "coeffs.csv").string());
  export_resolved_config(cfg, common.out_dir, "resolved_config.json");

  gpll::CsvWriter table({"m", "quadrature", "closed_form", "ratio", "remainder_after_m"});
  for (const auto& row : rows)
    table.add_row({std::to_string(row.m), format_real(row.quadrature),
                   row.has_closed_form ? format_real(row.closed_form) : "",
                   row.has_ratio ? format_real(row.ratio) : "",
                   format_real(row.remainder_after)});
  table.save((fs::path(common.out_dir) / "coeffs_table.csv").string());
  return 0;
}

int run_sigma(const CommonArgs& common, const std::map<std::string, std::string>& overrides) {
  const Config cfg = resolve_config(common, overrides);
  const auto poly = gpll::parse_real_list(cfg.require("poly"));
  const int n = int(cfg.get_int("n", 3));
  const Eigen::Index cap = env_dim_cap(Eigen::Index(cfg.get_int("dense_cap", 4000)));

  gpll::CovarianceOperator cov;
  if (cfg.has("empirical")) {
    const auto samples = cfg.get_int("empirical", 100000);
    const auto seed = std::uint64_t(cfg.get_int("seed", 0));
    cov = gpll::covariance_empirical(poly, n, samples, seed, cap);
  } else {
    cov = gpll::covariance_analytic(poly, n, cap);
  }
  const auto sp = gpll::spectrum(cov);

  fs::create_directories(common.out_dir);
  gpll::CsvWriter csv({"rank", "eigenvalue", "cumulative_mass"});
  const double total = sp.eigenvalues.sum();
  double running = 0;
  for (Eigen::Index i = 0; i < sp.eigenvalues.size(); ++i) {
    running += sp.eigenvalues[i];
    csv.add_row({std::to_string(i), format_real(sp.eigenvalues[i]),
                 format_real(total == 0 ? 0.0 : running / total)});
  }
  csv.save((fs::path(common.out_dir) / "sigma_spectrum.csv").string());

  const int d = int(poly.size()) - 1;
  double max_abs = 0;
  for (double a : poly) max_abs = std::max(max_abs, std::abs(a));
  const double opnorm = sp.eigenvalues.size() ? sp.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  gpll::CsvWriter bounds({"bound_name", "lhs", "rhs", "pass"});
  if (d >= 1) {
    const auto rhs = gpll::sigma_upper_bound_rhs(d, n, max_abs);
    bounds.add_row({"opnorm_upper", format_real(opnorm), format_real(rhs.value),
                    opnorm <= rhs.value ? "1" : "0"});
  }
  if (d == 2 && poly[0] == 0 && poly[1] == 0) {
    bounds.add_row({"opnorm_quadratic", format_real(opnorm), format_real(3.0 * max_abs),
                    opnorm <= 3.0 * max_abs ? "1" : "0"});
  }
  bounds.save((fs::path(common.out_dir) / "sigma_bounds.csv").string());
  export_resolved_config(cfg, common.out_dir, "resolved_config.json");
  return 0;
}

int run_sample(const CommonArgs& common, const std::map<std::string, std::string>& overrides) {
  const Config cfg = resolve_config(common, overrides);
  const auto act = gpll::parse_activation(cfg.get("activation", "relu"));
  const int n = int(cfg.get_int("n", 3));
  const auto k = cfg.get_int("k", 64);
  const int m = int(cfg.get_int("points", 4));
  const auto reps = cfg.get_int("reps", 1000);
  if (!cfg.has("seed")) throw std::invalid_argument("sample: 'seed' must be explicit");
  const auto seed = std::uint64_t(cfg.get_int("seed", 0));
  const int quad_order = int(cfg.get_int("quad_order", 128));
  const int kernel_degree =
      act.kind == gpll::ActivationKind::polynomial ? int(act.poly.size()) - 1
                                                   : int(cfg.get_int("kernel_degree", 40));

  const auto points = gpll::sphere_sample(n, m, gpll::derive_seed(seed, 1));
  const auto sample = gpll::sample_marginal(k, act, points, reps, gpll::derive_seed(seed, 2));
  const auto expansion = gpll::hermite_expansion(
      act, kernel_degree, std::max(quad_order, 2 * kernel_degree + 2));
  const auto kernel = gpll::nngp_kernel(expansion, points);

  fs::create_directories(common.out_dir);
  gpll::CsvWriter csv({"rep_id", "point_id", "value"});
  for (Eigen::Index r = 0; r < sample.table.rows(); ++r)
    for (Eigen::Index j = 0; j < sample.table.cols(); ++j)
      csv.add_row({std::to_string(r), std::to_string(j), format_real(sample.table(r, j))});
  csv.save((fs::path(common.out_dir) / "marginals.csv").string());

  gpll::CsvWriter side({"kind", "i", "j", "value"});
  for (Eigen::Index j = 0; j < points.rows(); ++j)
    for (Eigen::Index c = 0; c < points.cols(); ++c)
      side.add_row({"point", std::to_string(j), std::to_string(c), format_real(points(j, c))});
  for (Eigen::Index a = 0; a < kernel.matrix.rows(); ++a)
    for (Eigen::Index b = 0; b < kernel.matrix.cols(); ++b)
      side.add_row({"kernel", std::to_string(a), std::to_string(b),
                    format_real(kernel.matrix(a, b))});
  side.add_row({"kernel_remainder", "0", "0", format_real(kernel.remainder)});
  side.save((fs::path(common.out_dir) / "marginals_sidecar.csv").string());
  export_resolved_config(cfg, common.out_dir, "resolved_config.json");
  return 0;
}

Eigen::MatrixXd read_marginals_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file " + path);
  if (line.rfind("rep_id", 0) != 0)
    throw std::runtime_error(path + ": expected header rep_id,point_id,value");
  std::map<std::pair<long, long>, double> cells;
  long max_r = -1, max_c = -1;
  while (std::getline(in, line)) {
    if (gpll::trim_copy(line).empty()) continue;
    std::istringstream row(line);
    std::string r, c, v;
    if (!std::getline(row, r, ',') || !std::getline(row, c, ',') || !std::getline(row, v, ','))
      throw std::runtime_error(path + ": malformed row '" + line + "'");
    const long ri = std::stol(r), ci = std::stol(c);
    cells[{ri, ci}] = std::stod(v);
    max_r = std::max(max_r, ri);
    max_c = std::max(max_c, ci);
  }
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(max_r + 1, max_c + 1);
  for (const auto& [rc, v] : cells) table(rc.first, rc.second) = v;
  return table;
}

int run_distance(const CommonArgs& common, const std::map<std::string, std::string>& overrides) {
  const Config cfg = resolve_config(common, overrides);
  const auto table_a = read_marginals_csv(cfg.require("a"));
  const auto table_b = read_marginals_csv(cfg.require("b"));
  const std::string method = cfg.get("method", "auto");

  gpll::ProcessMarginalSample a, b;
  a.table = table_a;
  b.table = table_b;

  gpll::MarginalTransportOptions opt;
  if (method == "exact") {
    opt.estimator = gpll::TransportEstimator::assignment;
    opt.auto_estimator = false;
  } else if (method == "sinkhorn") {
    opt.estimator = gpll::TransportEstimator::sinkhorn;
  } else if (method != "auto") {
    throw std::invalid_argument("distance: method must be exact, sinkhorn, or auto");
  }
  opt.eps = cfg.get_real("eps", -1.0);
  opt.max_iters = int(cfg.get_int("max_iters", 2000));
  opt.bootstrap = int(cfg.get_int("bootstrap", 32));
  opt.seed = std::uint64_t(cfg.get_int("seed", 17));

  const auto est = gpll::marginal_transport_estimate(a, b, opt);

  ordered_json j;
  j["value"] = est.value;
  j["squared"] = est.squared;
  j["estimator"] = gpll::estimator_name(est.estimator);
  j["normalization"] =
      est.normalization == gpll::CostNormalization::per_point ? "per_point" : "raw";
  j["ci_low"] = est.ci_low;
  j["ci_high"] = est.ci_high;
  j["epsilon"] = est.epsilon;
  j["iterations"] = est.iterations;
  j["violation"] = est.violation;
  j["constant_C"] = cfg.get_real("C", 1.0);
  j["constant_Cprime"] = cfg.get_real("Cprime", 1.0);
  j["config_hash"] = gpll::config_hash_hex(cfg);
  fs::create_directories(common.out_dir);
  write_text(fs::path(common.out_dir) / "estimate.json", j.dump(2) + "\n");
  export_resolved_config(cfg, common.out_dir, "resolved_config.json");
  return 0;
}

int run_rate(const CommonArgs& common, const std::map<std::string, std::string>& overrides) {
  const Config cfg = resolve_config(common, overrides);
  const auto ecfg = gpll::make_experiment_config(cfg);
  const auto result = gpll::run_rate_experiment(ecfg);
  const std::string hash = gpll::config_hash_hex(cfg);

  fs::create_directories(common.out_dir);
  gpll::CsvWriter csv({"k", "estimate", "ci_low", "ci_high", "estimate_2n", "bound",
                       "pass_bound", "estimator", "epsilon", "iterations", "violation", "error",
                       "config_hash", "constant_C", "constant_Cprime"});
  for (const auto& row : result.rows)
    csv.add_row({format_real(row.k), format_real(row.estimate.value),
                 format_real(row.estimate.ci_low), format_real(row.estimate.ci_high),
                 format_real(row.estimate_2n), format_real(row.bound),
                 row.pass_bound ? "1" : "0", gpll::estimator_name(row.estimate.estimator),
                 format_real(row.estimate.epsilon), std::to_string(row.estimate.iterations),
                 format_real(row.estimate.violation), row.error, hash,
                 format_real(ecfg.constant_c), format_real(ecfg.constant_cprime)});
  csv.save((fs::path(common.out_dir) / "rate.csv").string());

  ordered_json j;
  j["fit_valid"] = result.fit_valid;
  j["slope"] = result.fit.slope;
  j["intercept"] = result.fit.intercept;
  j["r_squared"] = result.fit.r_squared;
  j["points_used"] = result.fit.points_used;
  j["config_hash"] = hash;
  j["constant_C"] = ecfg.constant_c;
  j["constant_Cprime"] = ecfg.constant_cprime;
  write_text(fs::path(common.out_dir) / "rate_fit.json", j.dump(2) + "\n");
  export_resolved_config(cfg, common.out_dir, "resolved_config.json");
  return 0;
}

int run_audit(const CommonArgs& common, const std::map<std::string, std::string>& overrides) {
  const Config cfg = resolve_config(common, overrides);
  const auto ecfg = gpll::make_experiment_config(cfg);
  const auto result = gpll::run_bound_audit(ecfg);
  const std::string hash = gpll::config_hash_hex(cfg);

  fs::create_directories(common.out_dir);
  gpll::CsvWriter csv({"name", "lhs", "rhs", "pass", "asserted", "note", "config_hash",
                       "constant_C", "constant_Cprime"});
  for (const auto& row : result.rows)
    csv.add_row({row.name, format_real(row.lhs), format_real(row.rhs), row.pass ? "1" : "0",
                 row.asserted ? "1" : "0", row.note, hash, format_real(ecfg.constant_c),
                 format_real(ecfg.constant_cprime)});
  csv.save((fs::path(common.out_dir) / "audit.csv").string());
  export_resolved_config(cfg, common.out_dir, "resolved_config.json");

  for (const auto& row : result.rows)
    if (row.asserted && !row.pass)
      std::cerr << "audit failure: " << row.name << " lhs=" << format_real(row.lhs)
                << " rhs=" << format_real(row.rhs) << "\n";
  return result.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-width network vs Gaussian process comparison lab"};
  app.require_subcommand(1);

  CommonArgs common;
  std::map<std::string, std::string> overrides;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "flat key = value config file");
    sub->add_option("--out", common.out_dir, "output directory");
    sub->add_option("--seed", common.seed, "seed override")->each([&](const std::string&) {
      common.seed_set = true;
    });
  };
  const auto add_override = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                                const std::string& help) {
    sub->add_option_function<std::string>(
           flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help)
        ->expected(1);
  };

  auto* coeffs = app.add_subcommand("coeffs", "Hermite coefficient table");
  add_common(coeffs);
  add_override(coeffs, "--activation", "activation", "relu | tanh | identity | poly:a0,a1,...");
  add_override(coeffs, "--dmax", "dmax", "maximum degree (<= 200)");
  add_override(coeffs, "--quad-order", "quad_order", "quadrature order");

  auto* sigma = app.add_subcommand("sigma", "feature covariance spectrum");
  add_common(sigma);
  add_override(sigma, "--poly", "poly", "comma-separated monomial coefficients a0,a1,...");
  add_override(sigma, "--n", "n", "input dimension");
  add_override(sigma, "--empirical", "empirical", "sample count for the empirical twin");

  auto* sample = app.add_subcommand("sample", "finite-width marginal sample");
  add_common(sample);
  add_override(sample, "--activation", "activation", "relu | tanh | identity | poly:a0,a1,...");
  add_override(sample, "--n", "n", "input dimension");
  add_override(sample, "--k", "k", "network width");
  add_override(sample, "--points", "points", "number of sphere points");
  add_override(sample, "--reps", "reps", "independent draws");

  auto* distance = app.add_subcommand("distance", "transport distance between two marginal files");
  add_common(distance);
  add_override(distance, "--a", "a", "first marginals.csv");
  add_override(distance, "--b", "b", "second marginals.csv");
  add_override(distance, "--method", "method", "exact | sinkhorn | auto");

  auto* rate = app.add_subcommand("rate", "transport distance vs width experiment");
  add_common(rate);

  auto* audit = app.add_subcommand("audit", "covariance and sharpness bound audit");
  add_common(audit);

  CLI11_PARSE(app, argc, argv);

  try {
    if (coeffs->parsed()) return run_coeffs(common, overrides);
    if (sigma->parsed()) return run_sigma(common, overrides);
    if (sample->parsed()) return run_sample(common, overrides);
    if (distance->parsed()) return run_distance(common, overrides);
    if (rate->parsed()) return run_rate(common, overrides);
    if (audit->parsed()) return run_audit(common, overrides);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
