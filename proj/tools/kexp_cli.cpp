// kexp: command-line front end. Exit codes: 0 all invariants pass,
// 1 an invariant failed, 2 bad usage or input.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kexp/experiment.hpp"
#include "kexp/reference.hpp"

using namespace kexp;

namespace {

// "5,10,20" or "5:40:5"
std::vector<Index> parse_grid(const std::string& s) {
  std::vector<Index> out;
  if (s.find(':') != std::string::npos) {
    long long a = 0, b = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(s);
    if (!(is >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0 ||
        !is.eof())
      throw InvalidArgument("--m: expected first:last:step, got '" + s + "'");
    for (long long m = a; m <= b; m += step) out.push_back(m);
    return out;
  }
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument("--m: bad entry '" + tok + "'");
    }
  }
  return out;
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::istringstream is(item);
    std::string tok;
    while (std::getline(is, tok, ','))
      if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

struct Overrides {
  std::string config;
  std::string preset, start, orth, m, output;
  std::vector<std::string> estimators;
  std::optional<Index> N, n, trace_m, points, cluster;
  std::optional<double> nu, tol, qtol, t_min, t_max;
  std::optional<int> p;
  std::optional<std::uint64_t> seed;
  bool no_truth = false;

  void add_common(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON config file");
    app->add_option("--preset", preset, "laplacian1d|free-schrodinger|convdiff2d|schrodinger-dw");
    app->add_option("--N", N, "convdiff2d grid points per direction");
    app->add_option("--nu", nu, "convdiff2d convection strength");
    app->add_option("--n", n, "dimension of the 1D presets");
    app->add_option("--start", start, "default|random|ones|case-a|case-b|case-c");
    app->add_option("--p", p, "phi-function index");
    app->add_option("--orth", orth, "mgs|mgs+|full");
    app->add_option("--seed", seed, "random seed");
    app->add_option("-o,--output", output, "output file (default stdout)");
  }

  ExperimentConfig build() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : ExperimentConfig::load(config);
    if (!preset.empty()) c.preset = preset;
    if (N) c.N = *N;
    if (nu) c.nu = *nu;
    if (n) c.n = *n;
    if (!start.empty()) c.start = start;
    if (p) c.p = *p;
    if (!orth.empty()) c.orth = orth;
    if (seed) c.seed = *seed;
    if (tol) c.tol = *tol;
    if (qtol) c.qtol = *qtol;
    if (!estimators.empty()) c.estimators = split_list(estimators);
    if (!m.empty()) c.m_grid = parse_grid(m);
    if (no_truth) c.true_error = false;
    if (trace_m) c.trace_m = *trace_m;
    if (t_min) c.trace_t_min = *t_min;
    if (t_max) c.trace_t_max = *t_max;
    if (points) c.trace_points = *points;
    if (cluster) c.cluster_size = *cluster;
    if (!output.empty()) c.output = output;
    return c;
  }
};

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw InvalidArgument("cannot write '" + path + "'");
  return file;
}

int cmd_run(const Overrides& o, const std::string& report_path) {
  const ExperimentConfig cfg = o.build();
  const auto rows = run_experiment(cfg);
  std::ofstream file;
  write_results_csv(open_output(cfg.output, file), rows);
  if (!report_path.empty()) {
    std::ofstream rep(report_path);
    if (!rep) throw InvalidArgument("cannot write '" + report_path + "'");
    rep << report_json(rows, cfg) << '\n';
  }
  const auto s = summarize(rows, cfg);
  std::fprintf(stderr,
               "%s: %ld rows, %ld proven-bound violations, ac.est.1 crossing m = %ld, "
               "ac.est.2 crossing m = %ld, eff-order <= gen-residual: %s\n",
               build_problem(cfg).description.c_str(), static_cast<long>(s.rows),
               static_cast<long>(s.violations), static_cast<long>(s.ac1_crossing_m),
               static_cast<long>(s.ac2_crossing_m),
               s.eff_order_below_gen_residual ? "yes" : "no");
  return s.violations == 0 && s.eff_order_below_gen_residual ? 0 : 1;
}

int cmd_trace(const Overrides& o) {
  const ExperimentConfig cfg = o.build();
  const auto grid = log_grid(cfg.trace_t_min, cfg.trace_t_max, cfg.trace_points);
  const DefectTrace tr = defect_trace(cfg, cfg.trace_m, grid);
  std::ofstream file;
  write_trace_csv(open_output(cfg.output, file), tr);
  return 0;
}

int cmd_propagate(const Overrides& o, const std::string& mtx, double t_final,
                  const std::string& estimator, Index m_max, bool with_result) {
  ExperimentConfig cfg = o.build();
  LinearOperator op = LinearOperator::from_dense(CMatrix::Identity(1, 1));
  CVector v;
  if (!mtx.empty()) {
    op = LinearOperator::from_csr(load_matrix_market(mtx));
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> g;
    v = CVector::Ones(op.n());
    if (cfg.start == "random" || cfg.start == "case-a")
      for (Index i = 0; i < op.n(); ++i) v[i] = g(rng);
    v.normalize();
  } else {
    cfg.m_grid = {1};
    Problem pr = build_problem(cfg);
    op = pr.op;
    v = pr.v;
  }
  StepControl ctrl;
  ctrl.tol = cfg.tol;
  ctrl.estimator = parse_estimator(estimator.empty() ? "real-part-bound" : estimator);
  ctrl.m_max = m_max;
  ctrl.t_final = t_final;
  ctrl.p = cfg.p;
  ctrl.qtol = cfg.qtol;
  ctrl.policy.scheme = parse_orth_scheme(cfg.orth);
  const auto rep = propagate(op, v, ctrl);

  auto doc = nlohmann::json::parse(rep.to_json(with_result));
  int code = 0;
  if (cfg.true_error && op.n() <= kTruthGuard) {
    std::optional<ReferencePhi> ref;
    try {
      ref = ReferencePhi::for_operator(op);
      const CVector exact = (*ref)(v, t_final, cfg.p);
      const double err = (rep.result - exact).norm();
      doc["true_error"] = err;
      doc["error_per_unit_time"] = err / t_final;
      // proven bounds (and their fallbacks) promise err <= T tol
      const bool proven = is_proven_bound(ctrl.estimator);
      doc["invariant_ok"] = !proven || err <= t_final * ctrl.tol;
      if (proven && err > t_final * ctrl.tol) code = 1;
    } catch (const InvalidArgument& e) {
      doc["true_error_skipped"] = e.what();
    }
  }
  std::ofstream file;
  std::ostream& os = open_output(cfg.output, file);
  os << doc.dump(2) << '\n';
  std::fprintf(stderr, "%zu substeps, %ld matvecs\n", rep.substeps.size(),
               static_cast<long>(rep.matvecs));
  return code;
}

int cmd_check() {
  bool ok = true;
  for (const auto& r : run_self_checks()) {
    std::printf("%s %s (%s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Krylov approximation of phi_p(tA)v with defect-based error bounds"};
  app.require_subcommand(1);

  Overrides run_o;
  std::string run_report;
  auto* run = app.add_subcommand("run", "experiment table (CSV) over an m grid");
  run_o.add_common(run);
  run->add_option("--tol", run_o.tol, "tolerance per unit step");
  run->add_option("--estimator", run_o.estimators, "estimator name(s), comma separated");
  run->add_option("--m", run_o.m, "m grid: 5,10,20 or 5:40:5");
  run->add_option("--qtol", run_o.qtol, "quadrature tolerance");
  run->add_flag("--no-true-error", run_o.no_truth, "skip the reference solution");
  run->add_option("--report", run_report, "also write a JSON report");

  Overrides tr_o;
  auto* trace = app.add_subcommand("defect-trace", "|defect(t)| over a log-spaced t grid (CSV)");
  tr_o.add_common(trace);
  trace->add_option("--m", tr_o.trace_m, "Krylov dimension");
  trace->add_option("--t-min", tr_o.t_min);
  trace->add_option("--t-max", tr_o.t_max);
  trace->add_option("--points", tr_o.points, "grid length");
  trace->add_option("--cluster", tr_o.cluster, "cluster size of the model column");

  Overrides pr_o;
  std::string mtx, pr_estimator;
  double t_final = 1.0;
  Index m_max = 30;
  bool with_result = false;
  auto* prop = app.add_subcommand("propagate", "adaptive substepping to t-final (JSON report)");
  pr_o.add_common(prop);
  prop->add_option("--mtx", mtx, "Matrix Market operator instead of a preset");
  prop->add_option("--t-final", t_final, "final time")->required();
  prop->add_option("--tol", pr_o.tol, "tolerance per unit step");
  prop->add_option("--estimator", pr_estimator, "step-size estimator");
  prop->add_option("--m", m_max, "Krylov dimension per substep");
  prop->add_option("--qtol", pr_o.qtol, "quadrature tolerance");
  prop->add_flag("--no-true-error", pr_o.no_truth, "skip the reference solution");
  prop->add_flag("--result", with_result, "include the result vector");

  auto* check = app.add_subcommand("check", "self-test suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    if (run->parsed()) return cmd_run(run_o, run_report);
    if (trace->parsed()) return cmd_trace(tr_o);
    if (prop->parsed())
      return cmd_propagate(pr_o, mtx, t_final, pr_estimator, m_max, with_result);
    if (check->parsed()) return cmd_check();
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s (line %ld)\n", e.what(), e.line());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
