#include "kexp/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "json.hpp"

#include "kexp/asymptotics.hpp"
#include "kexp/reference.hpp"
#include "kexp/small_dense.hpp"

namespace kexp {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<std::string> kPresets = {"laplacian1d", "free-schrodinger",
                                           "convdiff2d", "schrodinger-dw"};
const std::vector<std::string> kStarts = {"default", "random", "ones",
                                          "case-a", "case-b", "case-c"};

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

void field_error(const std::string& field, const std::string& msg) {
  throw InvalidArgument("config field '" + field + "': " + msg);
}

bool tridiagonal_preset(const std::string& p) {
  return p == "laplacian1d" || p == "free-schrodinger";
}

Index problem_size(const ExperimentConfig& cfg) {
  return cfg.preset == "convdiff2d" ? cfg.N * cfg.N : cfg.n;
}

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <class T>
std::string fmt_int(T x) {
  return std::to_string(x);
}

double parse_double(const std::string& s, long line) {
  double x = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  // from_chars rejects a leading '+'
  if (b != e && *b == '+') ++b;
  const auto r = std::from_chars(b, e, x);
  if (r.ec != std::errc() || r.ptr != e)
    throw ParseError("bad number '" + s + "'", line);
  return x;
}

long long parse_int(const std::string& s, long line) {
  long long x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError("bad integer '" + s + "'", line);
  return x;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const char* kResultsHeader =
    "m,estimator,status,t,zeta,err_per_unit_step,ac_est_1,ac_est_2,rho,"
    "matvecs,proven_bound,second_crossing";
const char* kTraceHeader = "t,defect_abs,asymptotic_k2,cluster_model";

std::string status_name(CrossingStatus s) {
  switch (s) {
    case CrossingStatus::found: return "found";
    case CrossingStatus::unbounded: return "unbounded";
    case CrossingStatus::no_admissible: return "no-admissible";
    case CrossingStatus::unavailable: return "unavailable";
  }
  return "unknown";
}

// Normalized eigenvector of tridiag(1,-2,1) with eigenvalue -4 sin^2(j pi/(2(n+1))).
void add_eigenvector(CVector& v, Index j, double weight) {
  const Index n = v.size();
  const double c = std::sqrt(2.0 / (n + 1.0));
  const double w = std::numbers::pi * j / (n + 1.0);
  for (Index k = 0; k < n; ++k) v[k] += weight * c * std::sin(w * (k + 1));
}

CMatrix random_hessenberg(Index m, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.2, 1.5);
  CMatrix h = CMatrix::Zero(m, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i <= j; ++i) h(i, j) = Complex(g(rng), g(rng));
    if (j + 1 < m) h(j + 1, j) = u(rng);
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (!contains(kPresets, preset))
    field_error("preset", "unknown preset '" + preset + "'");
  if (preset == "convdiff2d") {
    if (N < 2) field_error("N", "must be >= 2");
    if (!std::isfinite(nu)) field_error("nu", "must be finite");
  } else if (n < 2) {
    field_error("n", "must be >= 2");
  }
  if (!contains(kStarts, start))
    field_error("start", "unknown starting vector '" + start + "'");
  if ((start == "case-b" || start == "case-c") && !tridiagonal_preset(preset))
    field_error("start", start + " needs preset laplacian1d or free-schrodinger");
  if (start == "case-c" && n < 41) field_error("n", "case-c needs n >= 41");
  if (start == "case-b" && n < 26) field_error("n", "case-b needs n >= 26");
  if (estimators.empty()) field_error("estimators", "must not be empty");
  for (const auto& e : estimators) {
    try {
      parse_estimator(e);
    } catch (const InvalidArgument&) {
      field_error("estimators", "unknown estimator '" + e + "'");
    }
  }
  if (!(tol > 0.0)) field_error("tol", "must be > 0");
  if (m_grid.empty()) field_error("m_grid", "must not be empty");
  for (std::size_t i = 0; i < m_grid.size(); ++i) {
    if (m_grid[i] < 1) field_error("m_grid", "entries must be >= 1");
    if (i > 0 && m_grid[i] <= m_grid[i - 1])
      field_error("m_grid", "must be strictly increasing");
  }
  if (m_grid.back() > problem_size(*this))
    field_error("m_grid", "largest m exceeds the problem dimension");
  if (p < 0) field_error("p", "must be >= 0");
  if (!(qtol > 0.0)) field_error("qtol", "must be > 0");
  try {
    parse_orth_scheme(orth);
  } catch (const InvalidArgument&) {
    field_error("orth", "unknown scheme '" + orth + "'");
  }
  if (!(ac_threshold > 0.0)) field_error("ac_threshold", "must be > 0");
  if (trace_m < 1) field_error("trace_m", "must be >= 1");
  if (!(trace_t_min > 0.0)) field_error("trace_t_min", "must be > 0");
  if (!(trace_t_max >= trace_t_min))
    field_error("trace_t_max", "must be >= trace_t_min");
  if (trace_points < 1) field_error("trace_points", "must be >= 1");
  if (cluster_size < 1) field_error("cluster_size", "must be >= 1");
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  if (!j.is_object()) throw InvalidArgument("config: top level must be an object");
  ExperimentConfig c;
  auto get = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(dst);
    } catch (const nlohmann::json::exception&) {
      field_error(key, "wrong type");
    }
  };
  static const std::vector<std::string> known = {
      "preset", "N", "nu", "n", "start", "estimators", "tol", "m_grid", "p",
      "qtol", "orth", "seed", "true_error", "ac_threshold", "trace_m",
      "trace_t_min", "trace_t_max", "trace_points", "cluster_size", "output"};
  for (const auto& [k, _] : j.items())
    if (!contains(known, k)) field_error(k, "unknown field");
  get("preset", c.preset);
  get("N", c.N);
  get("nu", c.nu);
  get("n", c.n);
  get("start", c.start);
  get("estimators", c.estimators);
  get("tol", c.tol);
  get("m_grid", c.m_grid);
  get("p", c.p);
  get("qtol", c.qtol);
  get("orth", c.orth);
  get("seed", c.seed);
  get("true_error", c.true_error);
  get("ac_threshold", c.ac_threshold);
  get("trace_m", c.trace_m);
  get("trace_t_min", c.trace_t_min);
  get("trace_t_max", c.trace_t_max);
  get("trace_points", c.trace_points);
  get("cluster_size", c.cluster_size);
  get("output", c.output);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ExperimentConfig::to_json() const {
  ordered_json j;
  j["preset"] = preset;
  j["N"] = N;
  j["nu"] = nu;
  j["n"] = n;
  j["start"] = start;
  j["estimators"] = estimators;
  j["tol"] = tol;
  j["m_grid"] = m_grid;
  j["p"] = p;
  j["qtol"] = qtol;
  j["orth"] = orth;
  j["seed"] = seed;
  j["true_error"] = true_error;
  j["ac_threshold"] = ac_threshold;
  j["trace_m"] = trace_m;
  j["trace_t_min"] = trace_t_min;
  j["trace_t_max"] = trace_t_max;
  j["trace_points"] = trace_points;
  j["cluster_size"] = cluster_size;
  j["output"] = output;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Problems

Problem build_problem(const ExperimentConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> g;
  auto random_real = [&](Index n) {
    CVector v(n);
    for (Index i = 0; i < n; ++i) v[i] = g(rng);
    return v;
  };

  std::string start = cfg.start;
  if (start == "default")
    start = cfg.preset == "convdiff2d"       ? "ones"
            : cfg.preset == "schrodinger-dw" ? "wavepacket"
                                             : "random";

  if (cfg.preset == "schrodinger-dw") {
    auto s = build_schrodinger_double_well(cfg.n);
    CVector v = s.initial_state;
    if (start == "random" || start == "case-a") v = random_real(cfg.n);
    if (start == "ones") v = CVector::Ones(cfg.n);
    return {s.propagator, v.normalized(),
            "double-well Schrodinger, n = " + fmt_int(cfg.n)};
  }

  Problem pr{cfg.preset == "convdiff2d"
                 ? build_convection_diffusion_2d(cfg.N, cfg.nu)
             : cfg.preset == "laplacian1d"
                 ? build_laplacian_1d(cfg.n)
                 : LinearOperator::skew_from_hermitian(build_laplacian_1d(cfg.n),
                                                       kI),
             CVector(), ""};
  const Index n = pr.op.n();
  if (start == "ones") {
    pr.v = CVector::Ones(n);
  } else if (start == "case-b") {
    pr.v = CVector::Zero(n);
    for (Index j = 1; j <= n; ++j) add_eigenvector(pr.v, j, j <= 25 ? 1e6 : 1.0);
  } else if (start == "case-c") {
    pr.v = CVector::Zero(n);
    for (Index j = 1; j <= n; ++j)
      add_eigenvector(pr.v, j, (j <= 20 || j > n - 20) ? 1e5 : 1.0);
  } else {
    pr.v = random_real(n);
  }
  pr.v.normalize();
  pr.description = cfg.preset + (cfg.preset == "convdiff2d"
                                     ? ", N = " + fmt_int(cfg.N) + ", nu = " + fmt(cfg.nu)
                                     : ", n = " + fmt_int(cfg.n)) +
                   ", start " + start;
  return pr;
}

// ---------------------------------------------------------------------------
// Experiment

bool ResultRow::invariant_ok(double tol) const {
  if (!proven_bound || std::isnan(err_per_unit_step)) return true;
  return err_per_unit_step <= tol;
}

double krylov_true_error(const ReferencePhi& ref, const KrylovDecomposition& dec,
                         const CVector& v, int p, double t) {
  const Index m = dec.m;
  // v/p! + beta V_m tH phi_{p+1}(tH) e_1, see propagator()
  // The small problem is evaluated in long double: its double rounding,
  // about eps t ||H||, is not part of l_{p,m} and can exceed it for small t.
  using LC = std::complex<long double>;
  using LMatrix = Eigen::Matrix<LC, Eigen::Dynamic, Eigen::Dynamic>;
  const Index q = p + 1;
  const LMatrix th = dec.H.cast<LC>() * static_cast<long double>(t);
  LMatrix w = LMatrix::Zero(m + q, m + q);
  w.topLeftCorner(m, m) = th;
  w(0, m) = 1.0L;
  for (Index j = 0; j + 1 < q; ++j) w(m + j, m + j + 1) = 1.0L;
  const LMatrix ew = w.exp();
  const Eigen::Matrix<LC, Eigen::Dynamic, 1> y =
      static_cast<long double>(dec.beta) * (th * ew.col(m + q - 1).head(m));
  // split into two double parts; error_norm accumulates in long double
  CVector hi(m), lo(m);
  for (Index i = 0; i < m; ++i) {
    hi[i] = Complex(static_cast<double>(y[i].real()), static_cast<double>(y[i].imag()));
    const LC rest = y[i] - LC(hi[i].real(), hi[i].imag());
    lo[i] = Complex(static_cast<double>(rest.real()), static_cast<double>(rest.imag()));
  }
  CMatrix basis(v.size(), 2 * m + 1);
  basis.col(0) = v / std::tgamma(p + 1.0);
  basis.middleCols(1, m) = dec.V.leftCols(m);
  basis.rightCols(m) = dec.V.leftCols(m);
  CVector c(2 * m + 1);
  c[0] = 1.0;
  c.segment(1, m) = hi;
  c.tail(m) = lo;
  return ref.error_norm(v, t, p, basis, c);
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.true_error && problem_size(cfg) > kTruthGuard)
    field_error("true_error", "reference solution infeasible for n = " +
                                  fmt_int(problem_size(cfg)) + " > " +
                                  fmt_int(kTruthGuard));
  const Problem pr = build_problem(cfg);
  OrthPolicy policy;
  policy.scheme = parse_orth_scheme(cfg.orth);
  const KrylovDecomposition dec = krylov(pr.op, pr.v, cfg.m_grid.back(), policy);
  std::optional<ReferencePhi> ref;
  if (cfg.true_error) ref = ReferencePhi::for_operator(pr.op);

  std::vector<std::string> names = cfg.estimators;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());

  std::vector<ResultRow> rows;
  for (Index m : cfg.m_grid) {
    if (m > dec.m) {
      // invariant subspace reached: the approximation is exact
      for (const auto& name : names) {
        ResultRow r;
        r.m = m;
        r.estimator = name;
        r.status = "breakdown";
        r.t = kInf;
        r.matvecs = dec.matvecs;
        r.proven_bound = is_proven_bound(parse_estimator(name));
        rows.push_back(r);
      }
      continue;
    }
    const KrylovDecomposition sub = dec.prefix(m);
    const DefectModel dm(sub, cfg.p);
    for (const auto& name : names) {
      const auto t0 = std::chrono::steady_clock::now();
      const EstimatorKind kind = parse_estimator(name);
      ResultRow r;
      r.m = m;
      r.estimator = name;
      r.matvecs = sub.matvecs;
      r.proven_bound = is_proven_bound(kind);
      const TimeOfM tm = solve_t_of_m(dm, kind, cfg.tol, cfg.qtol);
      r.status = status_name(tm.status);
      r.second_crossing = tm.second_crossing;
      if (tm.status == CrossingStatus::found) {
        r.t = tm.t;
        r.zeta = std::exp(tm.log_zeta);
        r.ac_est_1 = accuracy_criterion_1(dm, r.t);
        r.ac_est_2 = accuracy_criterion_2(dm, r.t);
        r.rho = effective_order_from_h(dm, r.t).value_or(kNaN);
        if (ref) {
          r.err_per_unit_step = krylov_true_error(*ref, sub, pr.v, cfg.p, r.t) / r.t;
        }
      } else {
        r.t = tm.status == CrossingStatus::unbounded ? kInf
              : tm.status == CrossingStatus::no_admissible ? 0.0
                                                           : kNaN;
        r.zeta = kNaN;
        r.ac_est_1 = r.ac_est_2 = r.rho = kNaN;
      }
      r.wall_time = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
      rows.push_back(r);
    }
  }
  return rows;
}

ExperimentSummary summarize(const std::vector<ResultRow>& rows,
                            const ExperimentConfig& cfg) {
  ExperimentSummary s;
  s.rows = static_cast<Index>(rows.size());
  for (const auto& r : rows) {
    if (!r.invariant_ok(cfg.tol)) ++s.violations;
    if (r.status != "found") continue;
    if (r.estimator == "real-part-bound" && s.ac1_crossing_m == 0 &&
        r.ac_est_1 > cfg.ac_threshold)
      s.ac1_crossing_m = r.m;
    if (r.estimator == "factorial-bound" && s.ac2_crossing_m == 0 &&
        r.ac_est_2 > cfg.ac_threshold)
      s.ac2_crossing_m = r.m;
    // eff-order zeta = gen-residual zeta / (rho + 1) at the same t
    if ((r.estimator == "eff-order" || r.estimator == "gen-residual") &&
        !(r.rho >= 0.0))
      s.eff_order_below_gen_residual = false;
  }
  return s;
}

std::string report_json(const std::vector<ResultRow>& rows,
                        const ExperimentConfig& cfg) {
  auto num = [](double x) -> ordered_json {
    if (std::isfinite(x)) return x;
    return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  };
  const auto s = summarize(rows, cfg);
  ordered_json j;
  j["schema"] = "kexp-report v1";
  j["config"] = ordered_json::parse(cfg.to_json());
  j["summary"] = {{"rows", s.rows},
                  {"violations", s.violations},
                  {"ac1_crossing_m", s.ac1_crossing_m},
                  {"ac2_crossing_m", s.ac2_crossing_m},
                  {"eff_order_below_gen_residual", s.eff_order_below_gen_residual}};
  auto& arr = j["rows"] = ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"m", r.m},
                   {"estimator", r.estimator},
                   {"status", r.status},
                   {"t", num(r.t)},
                   {"zeta", num(r.zeta)},
                   {"err_per_unit_step", num(r.err_per_unit_step)},
                   {"ac_est_1", num(r.ac_est_1)},
                   {"ac_est_2", num(r.ac_est_2)},
                   {"rho", num(r.rho)},
                   {"matvecs", r.matvecs},
                   {"proven_bound", r.proven_bound},
                   {"second_crossing", r.second_crossing},
                   {"invariant_ok", r.invariant_ok(cfg.tol)},
                   {"wall_time", r.wall_time}});
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// CSV

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultsSchema << '\n' << kResultsHeader << '\n';
  for (const auto& r : rows) {
    os << r.m << ',' << r.estimator << ',' << r.status << ',' << fmt(r.t)
       << ',' << fmt(r.zeta) << ',' << fmt(r.err_per_unit_step) << ','
       << fmt(r.ac_est_1) << ',' << fmt(r.ac_est_2) << ',' << fmt(r.rho)
       << ',' << r.matvecs << ',' << (r.proven_bound ? 1 : 0) << ','
       << (r.second_crossing ? 1 : 0) << '\n';
  }
}

namespace {

void expect_line(std::istream& is, const char* want, long line) {
  std::string s;
  if (!std::getline(is, s) || s != want)
    throw ParseError("expected '" + std::string(want) + "'", line);
}

bool parse_bool(const std::string& s, long line) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw ParseError("bad flag '" + s + "'", line);
}

}  // namespace

std::vector<ResultRow> read_results_csv(std::istream& is) {
  expect_line(is, kResultsSchema, 1);
  expect_line(is, kResultsHeader, 2);
  std::vector<ResultRow> rows;
  std::string s;
  long line = 2;
  while (std::getline(is, s)) {
    ++line;
    if (s.empty()) continue;
    const auto f = split(s);
    if (f.size() != 12) throw ParseError("expected 12 fields", line);
    ResultRow r;
    r.m = parse_int(f[0], line);
    r.estimator = f[1];
    r.status = f[2];
    r.t = parse_double(f[3], line);
    r.zeta = parse_double(f[4], line);
    r.err_per_unit_step = parse_double(f[5], line);
    r.ac_est_1 = parse_double(f[6], line);
    r.ac_est_2 = parse_double(f[7], line);
    r.rho = parse_double(f[8], line);
    r.matvecs = parse_int(f[9], line);
    r.proven_bound = parse_bool(f[10], line);
    r.second_crossing = parse_bool(f[11], line);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Defect trace

std::vector<double> log_grid(double t_min, double t_max, Index count) {
  if (!(t_min > 0.0) || !(t_max >= t_min) || count < 1)
    throw InvalidArgument("log_grid: need 0 < t_min <= t_max and count >= 1");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = t_min;
    return g;
  }
  const double a = std::log(t_min), b = std::log(t_max);
  for (Index i = 0; i < count; ++i)
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / (count - 1));
  g.front() = t_min;
  g.back() = t_max;
  return g;
}

DefectTrace defect_trace(const ExperimentConfig& cfg, Index m,
                         const std::vector<double>& t_grid) {
  const Problem pr = build_problem(cfg);
  if (m < 1 || m > pr.op.n())
    throw InvalidArgument("defect_trace: m must lie in [1, n]");
  if (t_grid.empty()) throw InvalidArgument("defect_trace: empty t grid");
  OrthPolicy policy;
  policy.scheme = parse_orth_scheme(cfg.orth);
  const KrylovDecomposition dec = krylov(pr.op, pr.v, m, policy);
  const DefectModel dm(dec, cfg.p);

  DefectTrace tr;
  tr.m = dec.m;
  tr.p = cfg.p;
  tr.ritz = dm.ritz();
  std::vector<Complex> sorted = tr.ritz;
  std::stable_sort(sorted.begin(), sorted.end(), [](Complex a, Complex b) {
    return std::abs(a) < std::abs(b);
  });
  const std::size_t c =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.cluster_size), sorted.size());
  const NodeSet cluster(std::vector<Complex>(sorted.begin(), sorted.begin() + c),
                        cfg.p);
  double log_far = 0.0;
  for (std::size_t j = c; j < sorted.size(); ++j) log_far += std::log(std::abs(sorted[j]));

  const double log_pref = std::log(dm.beta()) + dm.log_gamma();
  const NodeSet nodes = dm.nodes();
  const auto expansion = rho_coeffs(nodes, 2);
  for (double t : t_grid) {
    if (!(t > 0.0)) throw InvalidArgument("defect_trace: t must be > 0");
    TracePoint pt;
    pt.t = t;
    pt.defect_abs = std::exp(defect_scaled(dm, t).log_abs());
    pt.asymptotic_k2 = std::exp(log_pref + expansion.log_norm(t));
    pt.cluster_model = std::exp(
        log_pref - log_far + divided_differences_exp_scaled(cluster, t).log_abs());
    tr.points.push_back(pt);
  }
  return tr;
}

void write_trace_csv(std::ostream& os, const DefectTrace& trace) {
  os << kTraceSchema << '\n' << kTraceHeader << '\n';
  for (const auto& p : trace.points)
    os << fmt(p.t) << ',' << fmt(p.defect_abs) << ',' << fmt(p.asymptotic_k2)
       << ',' << fmt(p.cluster_model) << '\n';
}

std::vector<TracePoint> read_trace_csv(std::istream& is) {
  expect_line(is, kTraceSchema, 1);
  expect_line(is, kTraceHeader, 2);
  std::vector<TracePoint> pts;
  std::string s;
  long line = 2;
  while (std::getline(is, s)) {
    ++line;
    if (s.empty()) continue;
    const auto f = split(s);
    if (f.size() != 4) throw ParseError("expected 4 fields", line);
    pts.push_back({parse_double(f[0], line), parse_double(f[1], line),
                   parse_double(f[2], line), parse_double(f[3], line)});
  }
  return pts;
}

DefectTrace emit_defect_trace(const ExperimentConfig& cfg, Index m,
                              const std::vector<double>& t_grid,
                              const std::string& path) {
  const DefectTrace tr = defect_trace(cfg, m, t_grid);
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  write_trace_csv(out, tr);
  return tr;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidArgument("loglog_slope: need two or more paired points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Self checks

std::vector<CheckResult> run_self_checks() {
  std::vector<CheckResult> out;
  auto record = [&](std::string name, bool ok, std::string detail) {
    out.push_back({std::move(name), ok, std::move(detail)});
  };
  std::mt19937_64 rng(0x6b657870);

  {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const Index m = 1 + i % 8;
      const CMatrix h = random_hessenberg(m, rng);
      double lg = 0.0;
      for (Index j = 0; j + 1 < m; ++j) lg += std::log(h(j + 1, j).real());
      for (double t : {0.1, 1.0, 10.0}) {
        const ScaledComplex a = corner_phi_scaled(h, 0, t, 1.0);
        const ScaledComplex b = divided_differences_exp_scaled(NodeSet(ritz_values(h)), t);
        const Complex ratio = a.mantissa / b.mantissa *
                              std::exp(a.log_scale - b.log_scale - lg);
        worst = std::max(worst, std::abs(ratio - 1.0));
      }
    }
    record("corner-identity", worst <= 1e-8, "max rel. deviation " + fmt(worst));
  }
  {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const Index m = 1 + i % 8;
      const CMatrix h = random_hessenberg(m, rng);
      for (int p = 1; p <= 3; ++p)
        for (double t : {0.1, 1.0, 10.0}) {
          const Complex a = std::pow(t, p) * phi_action(h, p, t, 1.0)[m - 1];
          const Complex b = corner_phi(h, p, t, 1.0);
          worst = std::max(worst, std::abs(a - b) / std::abs(b));
        }
    }
    record("augmentation-identity", worst <= 1e-10, "max rel. deviation " + fmt(worst));
  }
  {
    const auto s = build_schrodinger_double_well(128);
    const auto dec = krylov(s.propagator, s.initial_state, 20);
    double worst = 0.0;
    for (Index m : {5, 10, 20}) {
      const DefectModel dm(dec.prefix(m), 0);
      for (double t : {1e-4, 1e-3, 1e-2}) {
        const double a = bound_real_part(dm, t).log_value;
        const double b = bound_factorial(dm, t).log_value;
        worst = std::max(worst, std::abs(std::expm1(a - b)));
      }
    }
    record("skew-hermitian-coincidence", worst <= 1e-12, "max rel. deviation " + fmt(worst));
  }
  {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const Index m = 1 + i % 8;
      const int p = i % 3;
      const CMatrix h = random_hessenberg(m, rng);
      const NodeSet ns(ritz_values(h), p);
      const auto st = avg_var_stats(ns);
      const auto [r1, r2] = rho12_from_traces(h, p);
      const double M = static_cast<double>(m + p);
      const double e2 = (st.var_xi - st.var_eta) / (M + 1.0);
      worst = std::max({worst, std::abs(r1 - st.avg_xi) / (1.0 + std::abs(r1)),
                        std::abs(r2 - e2) / (1.0 + std::abs(r2))});
    }
    record("trace-formulas", worst <= 1e-12, "max deviation " + fmt(worst));
  }
  {
    const auto lap = build_laplacian_1d(200);
    std::normal_distribution<double> g;
    CVector v(200);
    for (Index i = 0; i < 200; ++i) v[i] = g(rng);
    v.normalize();
    StepControl ctrl;
    ctrl.t_final = 10.0;
    ctrl.m_max = 15;
    const auto rep = propagate(lap, v, ctrl);
    const double err =
        (rep.result - ReferencePhi::for_operator(lap)(v, ctrl.t_final, 0)).norm();
    record("propagate-tolerance", err <= ctrl.t_final * ctrl.tol,
           "error " + fmt(err) + " in " + fmt_int(rep.substeps.size()) + " substeps");
  }
  {
    std::vector<ResultRow> rows(2);
    rows[0].m = 5;
    rows[0].estimator = "eff-order";
    rows[0].t = 0.1 + 1e-17;
    rows[0].zeta = 1.0 / 3.0;
    rows[0].rho = kNaN;
    rows[1].m = 10;
    rows[1].estimator = "real-part-bound";
    rows[1].t = kInf;
    rows[1].err_per_unit_step = 4.9406564584124654e-324;
    rows[1].proven_bound = true;
    std::stringstream a, b;
    write_results_csv(a, rows);
    const auto back = read_results_csv(a);
    write_results_csv(b, back);
    std::stringstream a2;
    write_results_csv(a2, rows);
    record("csv-round-trip", a2.str() == b.str() && back.size() == 2,
           fmt_int(back.size()) + " rows");
  }
  return out;
}

}  // namespace kexp
