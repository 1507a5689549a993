#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "kexp/experiment.hpp"

using namespace kexp;

namespace {

std::string invalid_message(const ExperimentConfig& c) {
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    return e.what();
  }
  return "";
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

ExperimentConfig small_convdiff() {
  ExperimentConfig c;
  c.N = 12;
  c.nu = 50.0;
  c.m_grid = {4, 8, 12};
  c.estimators = {"gen-residual", "factorial-bound", "real-part-bound", "eff-order"};
  return c;
}

std::string csv_of(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  write_results_csv(os, rows);
  return os.str();
}

}  // namespace

TEST_CASE("config validation names the field") {
  ExperimentConfig c;
  CHECK(invalid_message(c).empty());

  c.m_grid.clear();
  CHECK(invalid_message(c).find("m_grid") != std::string::npos);
  c.m_grid = {5, 5, 10};
  CHECK(invalid_message(c).find("strictly increasing") != std::string::npos);
  c.m_grid = {5, 3};
  CHECK(invalid_message(c).find("m_grid") != std::string::npos);
  c = ExperimentConfig{};
  c.preset = "heat3d";
  CHECK(invalid_message(c).find("preset") != std::string::npos);
  c = ExperimentConfig{};
  c.estimators = {"factorial-bound", "magic"};
  CHECK(invalid_message(c).find("magic") != std::string::npos);
  c = ExperimentConfig{};
  c.tol = 0.0;
  CHECK(invalid_message(c).find("'tol'") != std::string::npos);
  c = ExperimentConfig{};
  c.orth = "householder";
  CHECK(invalid_message(c).find("orth") != std::string::npos);
  c = ExperimentConfig{};
  c.start = "case-b";  // needs a tridiagonal preset
  CHECK(invalid_message(c).find("start") != std::string::npos);
  c = ExperimentConfig{};
  c.N = 3;  // n = 9 < largest m
  CHECK(invalid_message(c).find("m_grid") != std::string::npos);

  CHECK_THROWS_AS(run_experiment(ExperimentConfig{.m_grid = {}}), InvalidArgument);
}

TEST_CASE("config JSON") {
  ExperimentConfig c;
  c.preset = "laplacian1d";
  c.n = 77;
  c.tol = 3e-9;
  c.m_grid = {2, 4};
  c.seed = 99;
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.n == 77);
  CHECK(back.m_grid == std::vector<Index>{2, 4});

  const auto partial = ExperimentConfig::from_json(R"({"nu": 500, "p": 1})");
  CHECK(partial.nu == 500.0);
  CHECK(partial.p == 1);
  CHECK(partial.N == ExperimentConfig{}.N);

  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(R"({"nuu": 1})"),
                       doctest::Contains("nuu"), InvalidArgument);
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(R"({"tol": "small"})"),
                       doctest::Contains("tol"), InvalidArgument);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{"), ParseError);
  CHECK_THROWS_AS(ExperimentConfig::from_json("[1]"), InvalidArgument);
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/cfg.json"), InvalidArgument);
}

TEST_CASE("problems") {
  ExperimentConfig c;
  c.N = 10;
  c.m_grid = {5};
  auto pr = build_problem(c);
  CHECK(pr.op.n() == 100);
  CHECK(pr.v.norm() == doctest::Approx(1.0));
  CHECK(std::abs(pr.v[0] - pr.v[99]) < 1e-15);  // ones

  c.preset = "free-schrodinger";
  c.n = 50;
  c.start = "case-b";
  pr = build_problem(c);
  CHECK(pr.op.structure() == Structure::skew_hermitian);
  CHECK(pr.v.norm() == doctest::Approx(1.0));
  // the weighted eigenvectors dominate: v is nearly in span{psi_1..psi_25}
  CVector rest = pr.v;
  const double s = std::sqrt(2.0 / 51.0);
  for (Index j = 1; j <= 25; ++j) {
    CVector psi(50);
    for (Index k = 0; k < 50; ++k) psi[k] = s * std::sin(std::numbers::pi * j * (k + 1) / 51.0);
    rest -= psi.dot(pr.v) * psi;
  }
  CHECK(rest.norm() < 1e-5);

  c.seed = 1;
  c.start = "random";
  const CVector r1 = build_problem(c).v;
  c.seed = 2;
  CHECK((build_problem(c).v - r1).norm() > 0.1);
}

TEST_CASE("experiment rows, invariants and determinism") {
  const auto cfg = small_convdiff();
  const auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 12);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const bool ordered = rows[i - 1].m < rows[i].m ||
                         (rows[i - 1].m == rows[i].m &&
                          rows[i - 1].estimator < rows[i].estimator);
    CHECK(ordered);
  }
  for (const auto& r : rows) {
    CHECK(r.invariant_ok(cfg.tol));
    CHECK(r.matvecs == r.m);
    if (r.status == "found") {
      CHECK(r.t > 0.0);
      CHECK(r.zeta <= r.t * cfg.tol);
      CHECK(std::isfinite(r.err_per_unit_step));
    }
  }
  const auto s = summarize(rows, cfg);
  CHECK(s.violations == 0);
  CHECK(s.eff_order_below_gen_residual);

  // identical output for identical config and seed
  CHECK(csv_of(run_experiment(cfg)) == csv_of(rows));

  const auto j = nlohmann::json::parse(report_json(rows, cfg));
  CHECK(j["schema"] == "kexp-report v1");
  CHECK(j["summary"]["rows"] == 12);
  CHECK(j["rows"][0]["invariant_ok"] == true);
  CHECK(j["config"]["N"] == 12);
}

TEST_CASE("a violated invariant is counted") {
  ResultRow r;
  r.proven_bound = true;
  r.err_per_unit_step = 2e-8;
  CHECK_FALSE(r.invariant_ok(1e-8));
  r.proven_bound = false;
  CHECK(r.invariant_ok(1e-8));
  r.proven_bound = true;
  r.err_per_unit_step = std::numeric_limits<double>::quiet_NaN();
  CHECK(r.invariant_ok(1e-8));
  ExperimentConfig c;
  r.err_per_unit_step = 2e-8;
  CHECK(summarize({r, r}, c).violations == 2);
}

TEST_CASE("results CSV round trip is bit-identical") {
  auto rows = run_experiment(small_convdiff());
  // exercise non-finite fields too
  rows[0].t = std::numeric_limits<double>::infinity();
  rows[0].rho = std::numeric_limits<double>::quiet_NaN();
  rows[1].zeta = 1.0 / 3.0;
  const std::string text = csv_of(rows);
  std::istringstream is(text);
  const auto back = read_results_csv(is);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto &a = rows[i], &b = back[i];
    CHECK(a.m == b.m);
    CHECK(a.estimator == b.estimator);
    CHECK(a.status == b.status);
    CHECK(a.matvecs == b.matvecs);
    CHECK(a.proven_bound == b.proven_bound);
    CHECK(a.second_crossing == b.second_crossing);
    for (auto field : {&ResultRow::t, &ResultRow::zeta, &ResultRow::err_per_unit_step,
                       &ResultRow::ac_est_1, &ResultRow::ac_est_2})
      CHECK(same_bits(a.*field, b.*field));
    CHECK((std::isnan(a.rho) ? std::isnan(b.rho) : same_bits(a.rho, b.rho)));
  }
  CHECK(csv_of(back) == text);

  std::istringstream bad_schema("# kexp-results v0\n");
  CHECK_THROWS_AS(read_results_csv(bad_schema), ParseError);
  std::istringstream bad_row(std::string(kResultsSchema) + "\n" +
                             text.substr(text.find('\n') + 1, text.find('\n', text.find('\n') + 1) - text.find('\n')) +
                             "5,x,found,1\n");
  try {
    read_results_csv(bad_row);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("skew-Hermitian experiment: real-part and factorial columns coincide") {
  ExperimentConfig c;
  c.preset = "schrodinger-dw";
  c.n = 150;
  c.m_grid = {10, 20, 30};
  c.estimators = {"real-part-bound", "factorial-bound"};
  const auto rows = run_experiment(c);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    CHECK(rows[i].estimator == "factorial-bound");
    CHECK(rows[i + 1].estimator == "real-part-bound");
    CHECK(rows[i].t == doctest::Approx(rows[i + 1].t).epsilon(1e-12));
    CHECK(rows[i].zeta == doctest::Approx(rows[i + 1].zeta).epsilon(1e-12));
    CHECK(rows[i].invariant_ok(c.tol));
    CHECK(rows[i + 1].invariant_ok(c.tol));
  }
}

TEST_CASE("true error needs a feasible reference") {
  ExperimentConfig c;
  c.N = 51;  // n = 2601 > guard
  c.m_grid = {3};
  c.estimators = {"factorial-bound"};
  CHECK_THROWS_WITH_AS(run_experiment(c), doctest::Contains("true_error"),
                       InvalidArgument);
  c.true_error = false;
  const auto rows = run_experiment(c);
  REQUIRE(rows.size() == 1);
  CHECK(std::isnan(rows[0].err_per_unit_step));
}

TEST_CASE("invariant subspace rows") {
  // a 2-term eigenvector combination: Krylov stops at m = 2
  ExperimentConfig c;
  c.preset = "laplacian1d";
  c.n = 30;
  c.start = "ones";
  c.m_grid = {5, 20};
  c.estimators = {"factorial-bound"};
  const auto rows = run_experiment(c);
  for (const auto& r : rows) CHECK(r.invariant_ok(c.tol));
}

TEST_CASE("log grid and slope") {
  const auto g = log_grid(1e-2, 1e2, 5);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == 1e-2);
  CHECK(g.back() == 1e2);
  CHECK(g[2] == doctest::Approx(1.0));
  CHECK(log_grid(3.0, 5.0, 1) == std::vector<double>{3.0});
  CHECK_THROWS_AS(log_grid(0.0, 1.0, 3), InvalidArgument);
  CHECK_THROWS_AS(log_grid(2.0, 1.0, 3), InvalidArgument);

  std::vector<double> y;
  for (double t : g) y.push_back(7.0 * std::pow(t, 4.5));
  CHECK(loglog_slope(g, y) == doctest::Approx(4.5));
  CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), InvalidArgument);
}

TEST_CASE("defect trace: random start decays like t^(m-1)") {
  ExperimentConfig c;
  c.preset = "free-schrodinger";
  c.n = 400;
  c.start = "case-a";
  for (Index m : {10, 20}) {
    const auto tr = defect_trace(c, m, log_grid(1e-2, 1e-1, 20));
    std::vector<double> x, y;
    for (const auto& p : tr.points) {
      x.push_back(p.t);
      y.push_back(p.defect_abs);
      // the K = 2 expansion is accurate at small t
      CHECK(p.asymptotic_k2 == doctest::Approx(p.defect_abs).epsilon(1e-3));
    }
    CHECK(std::abs(loglog_slope(x, y) - (m - 1)) <= 0.2);
    CHECK(tr.m == m);
    CHECK(tr.ritz.size() == static_cast<std::size_t>(m));
  }
}

TEST_CASE("defect trace: clustered start follows the cluster model") {
  ExperimentConfig c;
  c.preset = "free-schrodinger";
  c.n = 1000;
  c.start = "case-b";
  c.cluster_size = 4;
  // recorded window t in [40, 800]
  const auto tr = defect_trace(c, 20, log_grid(40.0, 800.0, 30));
  for (const auto& p : tr.points) {
    const double ratio = p.defect_abs / p.cluster_model;
    CHECK(ratio >= 0.2);
    CHECK(ratio <= 5.0);
  }
}

TEST_CASE("trace files") {
  ExperimentConfig c;
  c.preset = "laplacian1d";
  c.n = 60;
  const auto path =
      (std::filesystem::temp_directory_path() / "kexp_trace_test.csv").string();
  const auto one = emit_defect_trace(c, 8, {0.5}, path);
  std::ifstream in(path);
  const auto pts = read_trace_csv(in);
  REQUIRE(pts.size() == 1);
  CHECK(same_bits(pts[0].t, 0.5));
  CHECK(same_bits(pts[0].defect_abs, one.points[0].defect_abs));

  const auto tr = defect_trace(c, 8, log_grid(1e-3, 10.0, 17));
  std::ostringstream os;
  write_trace_csv(os, tr);
  std::istringstream is(os.str());
  const auto back = read_trace_csv(is);
  REQUIRE(back.size() == 17);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(same_bits(back[i].defect_abs, tr.points[i].defect_abs));
    CHECK(same_bits(back[i].asymptotic_k2, tr.points[i].asymptotic_k2));
    CHECK(same_bits(back[i].cluster_model, tr.points[i].cluster_model));
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(defect_trace(c, 0, {1.0}), InvalidArgument);
  CHECK_THROWS_AS(defect_trace(c, 8, {}), InvalidArgument);
  CHECK_THROWS_AS(defect_trace(c, 8, {-1.0}), InvalidArgument);
  CHECK_THROWS_AS(emit_defect_trace(c, 8, {1.0}, "/nonexistent/dir/x.csv"),
                  InvalidArgument);
}

TEST_CASE("self checks pass") {
  for (const auto& r : run_self_checks()) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
}
