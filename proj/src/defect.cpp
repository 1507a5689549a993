#include "kexp/defect.hpp"

#include <algorithm>
#include <cmath>

#include "kexp/asymptotics.hpp"
#include "kexp/quadrature.hpp"

namespace kexp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct NameEntry {
  EstimatorKind kind;
  std::string_view name;
};
constexpr NameEntry kNames[] = {
    {EstimatorKind::bound_real_part, "real-part-bound"},
    {EstimatorKind::bound_exact_real, "real-spectrum-bound"},
    {EstimatorKind::bound_factorial, "factorial-bound"},
    {EstimatorKind::est_generalized_residual, "gen-residual"},
    {EstimatorKind::est_effective_order, "eff-order"},
    {EstimatorKind::quadrature_oracle, "quadrature"},
};

ErrorEstimate make(EstimatorKind kind, const DefectModel& dm, double t) {
  ErrorEstimate e;
  e.kind = kind;
  e.is_proven_bound = is_proven_bound(kind);
  e.t = t;
  e.p = dm.p();
  e.m = dm.m();
  return e;
}

void require_t(double t, bool positive, const char* who) {
  if (positive ? !(t > 0.0) : !(t >= 0.0))
    throw InvalidArgument(std::string(who) +
                          (positive ? ": t must be > 0" : ": t must be >= 0"));
}

}  // namespace

std::string_view estimator_name(EstimatorKind k) {
  for (const auto& e : kNames)
    if (e.kind == k) return e.name;
  return "?";
}

EstimatorKind parse_estimator(std::string_view name) {
  for (const auto& e : kNames)
    if (e.name == name) return e.kind;
  throw InvalidArgument("unknown estimator '" + std::string(name) + "'");
}

bool is_proven_bound(EstimatorKind k) {
  return k != EstimatorKind::est_generalized_residual &&
         k != EstimatorKind::est_effective_order;
}

const std::vector<EstimatorKind>& all_estimators() {
  static const std::vector<EstimatorKind> all = [] {
    std::vector<EstimatorKind> v;
    for (const auto& e : kNames) v.push_back(e.kind);
    return v;
  }();
  return all;
}

// ---------------------------------------------------------------------------
// DefectModel

DefectModel::DefectModel(const KrylovDecomposition& dec, int p)
    : h_(dec.H), p_(p), beta_(dec.beta), h_next_(dec.h_next) {
  if (p < 0) throw InvalidArgument("DefectModel: p must be >= 0");
  if (dec.m < 1) throw InvalidArgument("DefectModel: empty decomposition");
  log_gamma_ = dec.log_gamma;
  gamma_phase_ = dec.gamma_phase;
  ritz_ = dec.ritz();
}

DefectModel::DefectModel(CMatrix h, double beta, double h_next, int p)
    : h_(std::move(h)), p_(p), beta_(beta), h_next_(h_next) {
  if (p < 0) throw InvalidArgument("DefectModel: p must be >= 0");
  if (h_.rows() < 1 || h_.rows() != h_.cols())
    throw InvalidArgument("DefectModel: H must be square and nonempty");
  if (!(beta > 0.0) || h_next < 0.0)
    throw InvalidArgument("DefectModel: need beta > 0 and h_next >= 0");
  init_gamma();
  ritz_ = ritz_values(h_);
}

void DefectModel::init_gamma() {
  log_gamma_ = 0.0;
  gamma_phase_ = 1.0;
  for (Index j = 0; j + 1 < h_.rows(); ++j) {
    const Complex s = h_(j + 1, j);
    if (s == Complex{})
      throw InvalidArgument("DefectModel: zero subdiagonal entry in H");
    log_gamma_ += std::log(std::abs(s));
    gamma_phase_ *= s / std::abs(s);
  }
}

double DefectModel::max_real_ritz() const {
  double x = -std::numeric_limits<double>::infinity();
  for (const auto& z : ritz_) x = std::max(x, z.real());
  return x;
}

bool DefectModel::real_spectrum() const {
  double radius = 0.0, eta = 0.0;
  for (const auto& z : ritz_) {
    radius = std::max(radius, std::abs(z));
    eta = std::max(eta, std::abs(z.imag()));
  }
  return eta <= 1e-10 * radius;
}

// ---------------------------------------------------------------------------
// Defect

ScaledComplex defect_scaled(const DefectModel& dm, double t) {
  require_t(t, false, "defect");
  return corner_phi_scaled(dm.H(), dm.p(), t, dm.beta());
}

Complex defect(const DefectModel& dm, double t) {
  return defect_scaled(dm, t).value();
}

ScaledComplex defect_via_divided_differences(const DefectModel& dm,
                                             double t) {
  require_t(t, false, "defect");
  ScaledComplex dd = divided_differences_exp_scaled(dm.nodes(), t);
  dd.mantissa *= dm.beta() * dm.gamma_phase();
  dd.log_scale += dm.log_gamma();
  return dd;
}

DefectEvaluation evaluate_defect(const DefectModel& dm, double t) {
  DefectEvaluation ev;
  ev.p = dm.p();
  ev.t = t;
  ev.ritz = dm.ritz();
  for (const auto& z : ev.ritz) {
    ev.xi.push_back(z.real());
    ev.eta.push_back(z.imag());
  }
  ev.value = defect_scaled(dm, t);
  return ev;
}

DefectIntegral defect_integral_quadrature(const DefectModel& dm, double t,
                                          double qtol) {
  require_t(t, true, "defect_integral_quadrature");
  if (!(qtol > 0.0))
    throw InvalidArgument("defect_integral_quadrature: qtol must be > 0");
  // Presample on x in (0, 1], s = t x, to fix a log scale and find
  // near-zeros of |delta|.
  constexpr int kSamples = 64;
  std::vector<double> logs(kSamples + 1, kNegInf);
  double c = kNegInf;
  for (int i = 1; i <= kSamples; ++i) {
    logs[i] = defect_scaled(dm, t * i / kSamples).log_abs();
    c = std::max(c, logs[i]);
  }
  DefectIntegral out;
  if (!std::isfinite(c)) return out;  // identically zero defect

  std::vector<double> breaks;
  for (int i = 2; i < kSamples; ++i) {
    if (!(logs[i] < logs[i - 1] && logs[i] <= logs[i + 1])) continue;
    double local = kNegInf;
    for (int j = std::max(1, i - 4); j <= std::min(kSamples, i + 4); ++j)
      local = std::max(local, logs[j]);
    if (logs[i] - local < std::log(1e-3))
      breaks.push_back(static_cast<double>(i) / kSamples);
  }

  auto g = [&](double x) {
    const double l = defect_scaled(dm, t * x).log_abs();
    return std::isfinite(l) ? std::exp(l - c) : 0.0;
  };
  const auto q = integrate_adaptive(g, 0.0, 1.0, 0.0, qtol, breaks);
  out.converged = q.converged;
  out.pieces = q.intervals;
  if (q.value <= 0.0) return out;
  out.rel_error = q.error_estimate / q.value;
  out.log_value = std::log(dm.h_next()) +
                  (1.0 - dm.p()) * std::log(t) + c + std::log(q.value);
  return out;
}

// ---------------------------------------------------------------------------
// Bounds and estimates

ErrorEstimate bound_real_part(const DefectModel& dm, double t) {
  require_t(t, false, "bound_real_part");
  auto e = make(EstimatorKind::bound_real_part, dm, t);
  if (t == 0.0 || dm.h_next() == 0.0) return e;
  const NodeSet xi = dm.nodes().real_parts().with_padding(dm.p() + 1);
  const double ld = divided_differences_exp_scaled(xi, t).log_abs();
  e.log_value = dm.log_beta_plus_h() + dm.log_gamma() -
                dm.p() * std::log(t) + ld;
  return e;
}

ErrorEstimate bound_exact_real(const DefectModel& dm, double t) {
  require_t(t, false, "bound_exact_real");
  if (!dm.real_spectrum())
    throw InvalidArgument("bound_exact_real: Ritz values are not real");
  auto e = make(EstimatorKind::bound_exact_real, dm, t);
  if (t == 0.0 || dm.h_next() == 0.0) return e;
  const ScaledComplex c = corner_phi_scaled(dm.H(), dm.p() + 1, t, dm.beta());
  e.log_value =
      std::log(dm.h_next()) - dm.p() * std::log(t) + c.log_abs();
  return e;
}

ErrorEstimate bound_factorial(const DefectModel& dm, double t, double xi_max) {
  require_t(t, false, "bound_factorial");
  if (xi_max > 0.0)
    throw InvalidArgument("bound_factorial: xi_max must be <= 0");
  if (dm.p() >= 1 && xi_max != 0.0)
    throw InvalidArgument("bound_factorial: xi_max must be 0 for p >= 1");
  auto e = make(EstimatorKind::bound_factorial, dm, t);
  if (t == 0.0 || dm.h_next() == 0.0) return e;
  const double m = static_cast<double>(dm.m());
  e.log_value = dm.log_beta_plus_h() + dm.log_gamma() + m * std::log(t) +
                t * xi_max - std::lgamma(m + dm.p() + 1.0);
  return e;
}

ErrorEstimate est_generalized_residual(const DefectModel& dm, double t) {
  require_t(t, true, "est_generalized_residual");
  auto e = make(EstimatorKind::est_generalized_residual, dm, t);
  if (dm.h_next() == 0.0) return e;
  e.log_value = std::log(dm.h_next()) + (1.0 - dm.p()) * std::log(t) +
                defect_scaled(dm, t).log_abs();
  return e;
}

std::optional<double> effective_order_from_h(const DefectModel& dm,
                                             double t) {
  require_t(t, true, "effective_order");
  const auto aug = AugmentedHessenberg::build(dm.H(), dm.p());
  const Index k = aug.full.rows();
  if (k == 1) return t * aug.full(0, 0).real();
  const ScaledColumn col = expm_first_column(t * aug.full);
  const Complex last = col.mantissa[k - 1];
  if (last == Complex{}) return std::nullopt;
  // y_{k-1} / y_k with the geometric scaling undone
  const Complex ratio =
      col.mantissa[k - 2] / last * std::exp(-col.log_ratio);
  const double rho =
      (t * (aug.full(k - 1, k - 1) + aug.full(k - 1, k - 2) * ratio)).real();
  if (!std::isfinite(rho)) return std::nullopt;
  return rho;
}

ErrorEstimate est_effective_order(const DefectModel& dm, double t) {
  auto e = make(EstimatorKind::est_effective_order, dm, t);
  const auto rho = effective_order_from_h(dm, t);
  if (!rho) {
    e.available = false;
    e.note = "(y)_m vanishes";
    return e;
  }
  if (*rho + 1.0 <= 0.0) {
    e.available = false;
    e.note = "rho(t) + 1 <= 0";
    return e;
  }
  const auto g = est_generalized_residual(dm, t);
  e.log_value = g.log_value - std::log(*rho + 1.0);
  return e;
}

ErrorEstimate quadrature_estimate(const DefectModel& dm, double t,
                                  double qtol) {
  auto e = make(EstimatorKind::quadrature_oracle, dm, t);
  if (t == 0.0) return e;
  const auto q = defect_integral_quadrature(dm, t, qtol);
  e.log_value = q.log_value;
  if (!q.converged) e.note = "subdivision limit reached";
  return e;
}

ErrorEstimate evaluate_estimator(EstimatorKind kind, const DefectModel& dm,
                                 double t, double qtol) {
  switch (kind) {
    case EstimatorKind::bound_real_part:
      return bound_real_part(dm, t);
    case EstimatorKind::bound_exact_real:
      if (!dm.real_spectrum()) {
        auto e = make(kind, dm, t);
        e.available = false;
        e.note = "Ritz values not real";
        return e;
      }
      return bound_exact_real(dm, t);
    case EstimatorKind::bound_factorial:
      return bound_factorial(dm, t, 0.0);
    case EstimatorKind::est_generalized_residual:
      return est_generalized_residual(dm, t);
    case EstimatorKind::est_effective_order:
      return est_effective_order(dm, t);
    case EstimatorKind::quadrature_oracle:
      return quadrature_estimate(dm, t, qtol);
  }
  throw InvalidArgument("evaluate_estimator: unknown kind");
}

// ---------------------------------------------------------------------------
// Accuracy criteria

double accuracy_criterion_1(const DefectModel& dm, double t) {
  const NodeStats st = avg_var_stats(dm.nodes());
  const double M = static_cast<double>(dm.m() + dm.p());
  return st.var_eta * M * t * t / (2.0 * (M + 1.0) * (M + 2.0));
}

double accuracy_criterion_2(const DefectModel& dm, double t) {
  const auto [r1, r2] = rho12_from_traces(dm.H(), dm.p());
  const double M = static_cast<double>(dm.m() + dm.p());
  return std::abs(r1 * M * t / (M + 1.0) +
                  (r1 * r1 + r2) * M * t * t / (2.0 * (M + 2.0)));
}

std::pair<double, double> rho12_from_traces(const CMatrix& h, int p) {
  const Index m = h.rows();
  if (m < 1 || h.cols() != m)
    throw InvalidArgument("rho12_from_traces: H must be square");
  if (p < 0) throw InvalidArgument("rho12_from_traces: p must be >= 0");
  Complex s1 = 0.0, s2 = 0.0;
  for (Index j = 0; j < m; ++j) {
    s1 += h(j, j);
    s2 += h(j, j) * h(j, j);
    if (j + 1 < m) s2 += 2.0 * h(j + 1, j) * h(j, j + 1);
  }
  const double M = static_cast<double>(m + p);
  const double rho1 = s1.real() / M;
  const double rho2 = (s1.imag() * s1.imag() - s1.real() * s1.real()) / (M * M) +
                      (s1 * s1 + s2).real() / (M * (M + 1.0));
  return {rho1, rho2};
}

}  // namespace kexp
