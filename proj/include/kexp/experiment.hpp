#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kexp/defect.hpp"
#include "kexp/krylov.hpp"
#include "kexp/linops.hpp"
#include "kexp/reference.hpp"
#include "kexp/stepper.hpp"

namespace kexp {

/// Largest dimension for which experiment rows carry a true-error column.
inline constexpr Index kTruthGuard = 2500;

/// Declarative description of an experiment. Presets:
///   laplacian1d       A = tridiag(1,-2,1), dimension n
///   free-schrodinger  A = i tridiag(1,-2,1), dimension n
///   convdiff2d        2D convection-diffusion, N interior points, nu
///   schrodinger-dw    A = -i (Laplace + V), double well, dimension n
/// Starting vectors: default, random, ones, case-a, case-b, case-c. The
/// default is the preset's natural choice (ones for convdiff2d, the
/// wavepacket for schrodinger-dw, random otherwise); case-b and case-c are
/// weighted eigenvector combinations and need a tridiagonal preset.
struct ExperimentConfig {
  std::string preset = "convdiff2d";
  Index N = 50;
  double nu = 100.0;
  Index n = 400;
  std::string start = "default";

  std::vector<std::string> estimators = {"real-part-bound", "factorial-bound",
                                         "gen-residual", "eff-order"};
  double tol = 1e-8;
  std::vector<Index> m_grid = {5, 10, 15, 20, 25, 30, 35, 40};
  int p = 0;
  double qtol = 1e-3;
  std::string orth = "mgs+";
  std::uint64_t seed = 20200101;
  bool true_error = true;
  /// ac.est.1 / ac.est.2 thresholds for the crossing summary.
  double ac_threshold = 0.1;

  // defect trace
  Index trace_m = 20;
  double trace_t_min = 1e-2;
  double trace_t_max = 1e2;
  Index trace_points = 200;
  Index cluster_size = 4;

  std::string output;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;

  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string to_json() const;
};

struct Problem {
  LinearOperator op;
  CVector v;
  std::string description;
};

/// Operator and normalized starting vector for a validated config.
Problem build_problem(const ExperimentConfig& cfg);

struct ResultRow {
  Index m = 0;
  std::string estimator;
  std::string status = "found";  // crossing status
  double t = 0.0;
  double zeta = 0.0;
  /// ||l(t)||_2 / t, NaN when not computed
  double err_per_unit_step = std::numeric_limits<double>::quiet_NaN();
  double ac_est_1 = 0.0;
  double ac_est_2 = 0.0;
  /// effective order at t; eff-order zeta <= gen-residual zeta iff rho >= 0
  double rho = std::numeric_limits<double>::quiet_NaN();
  Index matvecs = 0;
  bool proven_bound = false;
  bool second_crossing = false;
  double wall_time = 0.0;  // seconds; reported in JSON only

  /// Proven-bound rows must have err_per_unit_step <= tol.
  bool invariant_ok(double tol) const;
};

/// ||phi_p(tA)v - u_{p,m}(t)||_2 for the propagator form of
/// KrylovDecomposition::propagator, with the difference formed in the
/// reference backend's working precision.
double krylov_true_error(const ReferencePhi& ref, const KrylovDecomposition& dec,
                         const CVector& v, int p, double t);

/// One Krylov decomposition of the largest grid dimension; every m uses its
/// leading sub-decomposition. Rows are sorted by m, then estimator name.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);

struct ExperimentSummary {
  Index rows = 0;
  Index violations = 0;
  /// Smallest m with ac.est.1(t(m)) > threshold on real-part-bound rows,
  /// and ac.est.2 on factorial-bound rows; 0 when never exceeded.
  Index ac1_crossing_m = 0;
  Index ac2_crossing_m = 0;
  /// eff-order zeta <= gen-residual zeta at every shared m.
  bool eff_order_below_gen_residual = true;
};
ExperimentSummary summarize(const std::vector<ResultRow>& rows,
                            const ExperimentConfig& cfg);

std::string report_json(const std::vector<ResultRow>& rows,
                        const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// CSV tables. The first line carries the schema tag, the second the header;
// doubles are written in shortest round-trip form.

inline constexpr const char* kResultsSchema = "# kexp-results v1";
inline constexpr const char* kTraceSchema = "# kexp-defect-trace v1";

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
/// Throws ParseError on a schema or header mismatch.
std::vector<ResultRow> read_results_csv(std::istream& is);

struct TracePoint {
  double t = 0.0;
  double defect_abs = 0.0;
  double asymptotic_k2 = 0.0;
  /// gamma (prod_{j > c} |lambda_j|)^{-1} |exp_t[lambda_1..lambda_c]| over
  /// the c Ritz values of smallest modulus.
  double cluster_model = 0.0;
};

struct DefectTrace {
  std::vector<TracePoint> points;
  std::vector<Complex> ritz;
  Index m = 0;
  int p = 0;
};

/// Log-spaced grid of `count` points on [t_min, t_max]; a single point is
/// t_min.
std::vector<double> log_grid(double t_min, double t_max, Index count);

DefectTrace defect_trace(const ExperimentConfig& cfg, Index m,
                         const std::vector<double>& t_grid);
void write_trace_csv(std::ostream& os, const DefectTrace& trace);
std::vector<TracePoint> read_trace_csv(std::istream& is);
/// Computes the trace and writes it to `path`.
DefectTrace emit_defect_trace(const ExperimentConfig& cfg, Index m,
                              const std::vector<double>& t_grid,
                              const std::string& path);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Self-test suite behind the `check` verb.

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};
std::vector<CheckResult> run_self_checks();

}  // namespace kexp
