#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "gpll/harness.hpp"

using namespace gpll;

TEST_CASE("log-log slope fits") {
  std::vector<std::pair<double, double>> inv, cube, flat;
  for (double k : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    inv.emplace_back(k, 7.0 / k);
    cube.emplace_back(k, 3.0 * std::pow(k, -1.0 / 3.0));
    flat.emplace_back(k, 5.0);
  }
  const auto f1 = fit_loglog_slope(inv);
  CHECK(f1.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(f1.intercept == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  CHECK(f1.r_squared == doctest::Approx(1.0));
  CHECK(f1.points_used == 5);
  CHECK(fit_loglog_slope(cube).slope == doctest::Approx(-1.0 / 3.0).epsilon(1e-10));

  const auto f0 = fit_loglog_slope(flat);
  CHECK(f0.slope == doctest::Approx(0.0));
  CHECK(f0.r_squared == 1.0);

  CHECK_THROWS_AS(fit_loglog_slope({{1, 1}, {2, 1}, {4, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_loglog_slope({{1, 1}, {2, -1}, {4, 1}, {8, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_loglog_slope({{2, 1}, {2, 2}, {2, 3}, {2, 4}}), std::invalid_argument);
}

TEST_CASE("activation specs") {
  CHECK(parse_activation("relu").kind == ActivationKind::relu);
  CHECK(parse_activation("tanh").kind == ActivationKind::tanh);

  const auto id = parse_activation("identity");
  CHECK(id.kind == ActivationKind::polynomial);
  CHECK(id(0.3) == doctest::Approx(0.3));
  CHECK(id(-2.0) == doctest::Approx(-2.0));

  const auto p = parse_activation("poly:0.5,0,-1");
  REQUIRE(p.poly.size() == 3);
  CHECK(p.poly[0] == 0.5);
  CHECK(p.poly[2] == -1.0);
  CHECK(p(2.0) == doctest::Approx(-3.5));

  CHECK_THROWS_AS(parse_activation(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_activation("poly:"), std::invalid_argument);
  CHECK_THROWS_AS(parse_activation("softplus"), std::invalid_argument);
}

TEST_CASE("config parsing, hashing, formatting") {
  const auto cfg = parse_config_text(
      "# comment\n"
      "\n"
      "  n = 4 \n"
      "tag=first\n"
      "tag = second\n");
  CHECK(cfg.values.size() == 2);
  CHECK(cfg.get_int("n", 0) == 4);
  CHECK(cfg.require("tag") == "second");
  CHECK(cfg.get("absent", "dflt") == "dflt");
  CHECK_THROWS_AS(cfg.require("absent"), std::invalid_argument);

  try {
    parse_config_text("a=1\nno equals sign here\n");
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("=3\n"), std::invalid_argument);

  const auto bad = parse_config_text("x=1.5y\nk=12x\n");
  CHECK_THROWS_AS(bad.get_real("x", 0.0), std::invalid_argument);
  CHECK_THROWS_AS(bad.get_int("k", 0), std::invalid_argument);

  const auto a = parse_config_text("x=1\ny=2\n");
  const auto b = parse_config_text("y=2\nx=1\n");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(parse_config_text("x=1\ny=3\n")));
  CHECK(config_hash_hex(a).size() == 16);

  const auto xs = parse_real_list("1, 2.5 ,3e-1");
  REQUIRE(xs.size() == 3);
  CHECK(xs[1] == 2.5);
  CHECK(xs[2] == doctest::Approx(0.3));
  CHECK_THROWS_AS(parse_real_list("1,two"), std::invalid_argument);

  for (double v : {0.1, 1.0 / 3.0, 1e-17, 12345.678, -0.0}) {
    CHECK(std::stod(format_real(v)) == v);
  }
}

TEST_CASE("csv rendering") {
  CsvWriter w({"k", "value"});
  w.add_row({"4", "0.5"});
  w.add_row({"8", format_real(0.25)});
  CHECK(w.to_string() == "k,value\n4,0.5\n8,0.25\n");
  CHECK_THROWS_AS(w.add_row({"lonely"}), std::invalid_argument);
}

TEST_CASE("experiment config validation") {
  auto base = parse_config_text("seed=9\nn=3\nkgrid=4,8,16,32\n");
  const auto e = make_experiment_config(base);
  CHECK(e.seed == 9);
  CHECK(e.n == 3);
  CHECK(e.k_grid.size() == 4);
  CHECK(e.estimator == "assignment");

  CHECK_THROWS_AS(make_experiment_config(parse_config_text("n=3\n")), std::invalid_argument);
  CHECK_THROWS_AS(make_experiment_config(parse_config_text("seed=9\nestimator=frobnicate\n")),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_experiment_config(parse_config_text("seed=9\nkgrid=4,4,8\n")),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_experiment_config(parse_config_text("seed=9\nn=1\n")),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_experiment_config(parse_config_text("seed=9\nreps=0\n")),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_experiment_config(parse_config_text("seed=9\nactivation=mystery\n")),
                  std::invalid_argument);
}

TEST_CASE("coefficient tables") {
  const auto relu_rows = run_coefficient_table(Activation::relu(), 12, 128);
  REQUIRE(relu_rows.size() == 13);
  CHECK(relu_rows[0].has_ratio);
  CHECK(relu_rows[0].ratio == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(relu_rows[1].ratio == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(relu_rows[2].ratio == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(relu_rows[4].ratio == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK_FALSE(relu_rows[3].has_ratio);  // odd coefficients vanish
  CHECK_FALSE(relu_rows[5].has_ratio);
  for (std::size_t i = 1; i < relu_rows.size(); ++i)
    CHECK(relu_rows[i].remainder_after <= relu_rows[i - 1].remainder_after + 1e-15);

  const auto tanh_rows = run_coefficient_table(Activation::tanh(), 6, 64);
  for (const auto& row : tanh_rows) CHECK_FALSE(row.has_closed_form);

  Eigen::VectorXd sq(3);
  sq << 0, 0, 1;
  const auto sq_rows = run_coefficient_table(Activation::polynomial(sq), 4, 32);
  CHECK(sq_rows[1].remainder_after > 0.1);
  CHECK(sq_rows[2].remainder_after < 1e-12);

  CHECK_THROWS_AS(run_coefficient_table(Activation::relu(), 201, 512), std::invalid_argument);
}

TEST_CASE("bound audit rows") {
  auto cfg = make_experiment_config(parse_config_text("seed=5\naudit_vectors=40\n"));
  const auto result = run_bound_audit(cfg);

  int asserted_fails = 0;
  const AuditRow* l3 = nullptr;
  for (const auto& row : result.rows) {
    if (row.asserted && !row.pass) ++asserted_fails;
    if (row.name == "sharpness_slope_l3") l3 = &row;
    if (row.name.rfind("opnorm_", 0) == 0) CHECK(row.pass);
    if (row.name.rfind("variance_lower_", 0) == 0) CHECK(row.pass);
    if (row.name.rfind("lambda_min_weighted_", 0) == 0) CHECK_FALSE(row.asserted);
    if (row.name == "sharpness_slope_l2") {
      CHECK(row.pass);
      CHECK(row.lhs == doctest::Approx(1.0).epsilon(0.1));
    }
  }
  REQUIRE(l3 != nullptr);
  CHECK(result.failures == asserted_fails);
  CHECK(result.failures == (l3->pass ? 0 : 1));
}

TEST_CASE("rate experiment smoke run") {
  auto cfg = make_experiment_config(parse_config_text(
      "seed=2024\nactivation=poly:0,0,1\nn=3\npoints=2\nreps=64\nkgrid=4,8,16,32\nbootstrap=4\n"));
  const auto result = run_rate_experiment(cfg);
  REQUIRE(result.rows.size() == 4);
  for (const auto& row : result.rows) {
    CHECK(row.error.empty());
    CHECK(row.estimate.value >= 0.0);
    CHECK(std::isfinite(row.bound));
    CHECK(row.estimate_2n >= 0.0);
  }
  CHECK(result.fit_valid);

  const auto again = run_rate_experiment(cfg);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    CHECK(result.rows[i].estimate.value == again.rows[i].estimate.value);
    CHECK(result.rows[i].estimate_2n == again.rows[i].estimate_2n);
  }

  auto ragged = cfg;
  ragged.k_grid = {2.5, 4, 8, 16, 32};
  const auto mixed = run_rate_experiment(ragged);
  REQUIRE(mixed.rows.size() == 5);
  CHECK_FALSE(mixed.rows[0].error.empty());
  CHECK(std::isnan(mixed.rows[0].estimate.value));
  for (std::size_t i = 1; i < mixed.rows.size(); ++i) CHECK(mixed.rows[i].error.empty());
  CHECK(mixed.fit_valid);

  auto empty = cfg;
  empty.k_grid.clear();
  CHECK_THROWS_AS(run_rate_experiment(empty), std::invalid_argument);
}
