#include "kexp/stepper.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "kexp/small_dense.hpp"

namespace kexp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxSubsteps = 100000;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

std::optional<EstimatorKind> fallback_of(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::est_effective_order:
      return EstimatorKind::est_generalized_residual;
    case EstimatorKind::bound_factorial:
      return std::nullopt;
    default:
      return EstimatorKind::bound_factorial;
  }
}

double start_time(const CMatrix& h) {
  const double nrm = h.cwiseAbs().colwise().sum().maxCoeff();
  return nrm > 0.0 ? 1.0 / nrm : 1.0;
}

std::optional<double> estimate_log(EstimatorKind kind, const DefectModel& dm,
                                   double t, double qtol) {
  const auto e = evaluate_estimator(kind, dm, t, qtol);
  if (!e.available || std::isnan(e.log_value)) return std::nullopt;
  return e.log_value;
}

// Tries the requested estimator, then the fallback ladder, until the
// crossing can be located.
struct LadderResult {
  TimeOfM time;
  EstimatorKind kind;
  std::vector<std::string> fallbacks;
};

LadderResult solve_with_ladder(
    EstimatorKind first,
    const std::function<std::function<std::optional<double>(double)>(
        EstimatorKind)>& make_log_zeta,
    double t0, double log_tol) {
  LadderResult r;
  std::optional<EstimatorKind> kind = first;
  while (kind) {
    r.kind = *kind;
    r.time = solve_crossing(make_log_zeta(*kind), t0, log_tol);
    if (r.time.status != CrossingStatus::unavailable) return r;
    const auto next = fallback_of(*kind);
    if (next)
      r.fallbacks.push_back(std::string(estimator_name(*kind)) + " -> " +
                            std::string(estimator_name(*next)));
    kind = next;
  }
  throw NumericalError("propagate: no estimator available for substep");
}

}  // namespace

void StepControl::validate() const {
  if (!(tol > 0.0)) throw InvalidArgument("StepControl: tol must be > 0");
  if (m_max < 2) throw InvalidArgument("StepControl: m_max must be >= 2");
  if (!(t_final > 0.0))
    throw InvalidArgument("StepControl: t_final must be > 0");
  if (p < 0) throw InvalidArgument("StepControl: p must be >= 0");
  if (!(qtol > 0.0)) throw InvalidArgument("StepControl: qtol must be > 0");
  policy.validate();
}

bool lucky_breakdown_check(double beta, double h_next, int p, double tol) {
  return beta * h_next / std::tgamma(p + 2.0) <= tol;
}

TimeOfM solve_crossing(
    const std::function<std::optional<double>(double)>& log_zeta, double t0,
    double log_tol) {
  if (!(t0 > 0.0)) throw InvalidArgument("solve_crossing: t0 must be > 0");
  TimeOfM out;
  bool failed = false;
  auto g = [&](double t) {
    ++out.evaluations;
    const auto lz = log_zeta(t);
    if (!lz || std::isnan(*lz)) {
      failed = true;
      return 0.0;
    }
    return *lz - std::log(t) - log_tol;
  };
  auto give_up = [&]() {
    out.status = CrossingStatus::unavailable;
    return out;
  };

  double lo = 0.0, hi = 0.0, g_lo = 0.0;
  const double g0 = g(t0);
  if (failed) return give_up();
  if (g0 >= 0.0) {
    hi = t0;
    for (double t = 0.5 * t0;; t *= 0.5) {
      if (t < 1e-12 * t0) {
        out.status = CrossingStatus::no_admissible;
        out.t = 0.0;
        return out;
      }
      const double gv = g(t);
      if (failed) return give_up();
      if (gv < 0.0) {
        lo = t;
        g_lo = gv;
        break;
      }
      hi = t;
    }
  } else {
    lo = t0;
    g_lo = g0;
    for (double t = 2.0 * t0;; t *= 2.0) {
      if (t > 1e12 * t0) {
        out.status = CrossingStatus::unbounded;
        out.t = std::numeric_limits<double>::infinity();
        return out;
      }
      const double gv = g(t);
      if (failed) return give_up();
      if (gv >= 0.0) {
        hi = t;
        break;
      }
      lo = t;
      g_lo = gv;
    }
  }
  while (hi / lo - 1.0 > 1e-6) {
    const double mid = std::sqrt(lo * hi);
    const double gv = g(mid);
    if (failed) return give_up();
    if (gv < 0.0) {
      lo = mid;
      g_lo = gv;
    } else {
      hi = mid;
    }
  }
  out.t = lo;
  out.log_zeta = g_lo + std::log(lo) + log_tol;
  for (int i = 1; i <= 12 && !out.second_crossing; ++i) {
    const double s = hi * std::pow(10.0, i / 12.0);
    const double gv = g(s);
    if (failed) {
      failed = false;
      continue;
    }
    if (gv < 0.0) out.second_crossing = true;
  }
  out.status = CrossingStatus::found;
  return out;
}

TimeOfM solve_t_of_m(const DefectModel& dm, EstimatorKind kind, double tol,
                     double qtol) {
  if (!(tol > 0.0)) throw InvalidArgument("solve_t_of_m: tol must be > 0");
  return solve_crossing(
      [&](double t) { return estimate_log(kind, dm, t, qtol); },
      start_time(dm.H()), std::log(tol));
}

TimeOfM solve_t_of_m(const KrylovDecomposition& dec, const StepControl& ctrl) {
  const DefectModel dm(dec, ctrl.p);
  return solve_t_of_m(dm, ctrl.estimator, ctrl.tol, ctrl.qtol);
}

double PropagationReport::total_time() const {
  double s = 0.0;
  for (const auto& st : substeps) s += st.tau;
  return s;
}

std::string PropagationReport::to_json(bool include_result) const {
  nlohmann::ordered_json j;
  j["t_final"] = t_final;
  j["p"] = p;
  j["tol"] = tol;
  j["matvecs"] = matvecs;
  j["substep_count"] = substeps.size();
  auto& arr = j["substeps"] = nlohmann::ordered_json::array();
  for (const auto& s : substeps) {
    nlohmann::ordered_json o;
    o["t_start"] = s.t_start;
    o["tau"] = s.tau;
    o["m"] = s.m;
    o["estimator"] = std::string(estimator_name(s.estimator));
    o["zeta"] = std::isfinite(s.log_zeta) ? std::exp(s.log_zeta) : 0.0;
    o["breakdown"] = s.breakdown;
    o["lucky_stop"] = s.lucky_stop;
    o["second_crossing"] = s.second_crossing;
    o["fallbacks"] = s.fallbacks;
    arr.push_back(std::move(o));
  }
  if (include_result) {
    auto& re = j["result_re"] = nlohmann::ordered_json::array();
    auto& im = j["result_im"] = nlohmann::ordered_json::array();
    for (Index i = 0; i < result.size(); ++i) {
      re.push_back(result[i].real());
      im.push_back(result[i].imag());
    }
  }
  return j.dump(2);
}

PropagationReport propagate(const LinearOperator& op, const CVector& v,
                            const StepControl& ctrl) {
  ctrl.validate();
  if (v.size() != op.n())
    throw InvalidArgument("propagate: vector has wrong dimension");
  if (op.mu2_estimate() > 1e-8 * std::max(op.norm2_estimate(), 1.0))
    throw InvalidArgument(
        "propagate: operator is not dissipative (mu2 estimate " +
        std::to_string(op.mu2_estimate()) + " > 0)");

  PropagationReport rep;
  rep.t_final = ctrl.t_final;
  rep.p = ctrl.p;
  rep.tol = ctrl.tol;
  const double T = ctrl.t_final;
  const Index m = std::min(ctrl.m_max, op.n());
  const int p = ctrl.p;

  if (p == 0) {
    CVector u = v;
    double elapsed = 0.0;
    while (elapsed < T) {
      if (rep.substeps.size() >= kMaxSubsteps)
        throw NumericalError("propagate: substep limit reached");
      const double remaining = T - elapsed;
      Substep s;
      s.t_start = elapsed;
      s.estimator = ctrl.estimator;
      if (u.norm() == 0.0) {
        s.tau = remaining;
        rep.substeps.push_back(s);
        break;
      }
      OrthPolicy pol = ctrl.policy;
      pol.lucky = LuckyStop{ctrl.tol, 0};
      const KrylovDecomposition dec = krylov(op, u, m, pol);
      rep.matvecs += dec.matvecs;
      s.m = dec.m;
      s.breakdown = dec.breakdown;
      s.lucky_stop = dec.lucky_stop;
      if (dec.breakdown || dec.lucky_stop) {
        s.tau = remaining;
        s.log_zeta = std::log(s.tau) + std::log(dec.beta) +
                     std::log(dec.h_next);
      } else {
        const DefectModel dm(dec, 0);
        auto make = [&](EstimatorKind k) {
          return std::function<std::optional<double>(double)>(
              [&dm, k, &ctrl](double t) {
                return estimate_log(k, dm, t, ctrl.qtol);
              });
        };
        const auto lr = solve_with_ladder(ctrl.estimator, make,
                                          start_time(dm.H()),
                                          std::log(ctrl.tol));
        if (lr.time.status == CrossingStatus::no_admissible)
          throw NumericalError("propagate: no admissible step for m = " +
                               std::to_string(dec.m));
        s.estimator = lr.kind;
        s.fallbacks = lr.fallbacks;
        s.second_crossing = lr.time.second_crossing;
        s.tau = std::min(lr.time.t, remaining);
        s.log_zeta = estimate_log(lr.kind, dm, s.tau, ctrl.qtol).value_or(
            lr.time.log_zeta);
      }
      u = dec.propagator(u, 0, s.tau);
      elapsed = s.tau >= remaining ? T : elapsed + s.tau;
      rep.substeps.push_back(std::move(s));
    }
    rep.result = u;
    return rep;
  }

  // p >= 1: w(t) = t^p phi_p(tA) v, advanced by
  // w(t_k + tau) = e^{tau A} w(t_k)
  //              + sum_j t_k^{p-1-j}/(p-1-j)! tau^{j+1} phi_{j+1}(tau A) v.
  // The per-substep tolerance is tol * T^p so that the final error of
  // phi_p(TA)v = w(T)/T^p is at most T tol.
  const KrylovDecomposition decv = krylov(op, v, m, ctrl.policy);
  rep.matvecs += decv.matvecs;
  std::vector<DefectModel> dmv;
  for (int j = 1; j <= p; ++j) dmv.emplace_back(decv, j);
  const double log_tol_w = std::log(ctrl.tol) + p * std::log(T);

  CVector w = CVector::Zero(op.n());
  double elapsed = 0.0;
  while (elapsed < T) {
    if (rep.substeps.size() >= kMaxSubsteps)
      throw NumericalError("propagate: substep limit reached");
    const double remaining = T - elapsed;
    const double tk = elapsed;
    std::vector<double> log_c(p);
    for (int j = 0; j < p; ++j) {
      const int e = p - 1 - j;
      log_c[j] = e == 0 ? 0.0
                        : (tk > 0.0 ? e * std::log(tk) - std::lgamma(e + 1.0)
                                    : kNegInf);
    }
    Substep s;
    s.t_start = tk;
    s.m = decv.m;
    s.breakdown = decv.breakdown;

    std::optional<KrylovDecomposition> decw;
    std::optional<DefectModel> dmw;
    if (w.norm() > 0.0) {
      decw = krylov(op, w, m, ctrl.policy);
      rep.matvecs += decw->matvecs;
      dmw.emplace(*decw, 0);
      s.m = std::max(s.m, decw->m);
      s.breakdown = s.breakdown || decw->breakdown;
    }

    auto combined = [&](EstimatorKind k, double tau) -> std::optional<double> {
      double total = kNegInf;
      if (dmw && !decw->breakdown) {
        const auto lz = estimate_log(k, *dmw, tau, ctrl.qtol);
        if (!lz) return std::nullopt;
        total = *lz;
      }
      if (!decv.breakdown) {
        for (int j = 0; j < p; ++j) {
          if (log_c[j] == kNegInf) continue;
          const auto lz = estimate_log(k, dmv[j], tau, ctrl.qtol);
          if (!lz) return std::nullopt;
          total = log_add(total, log_c[j] + (j + 1) * std::log(tau) + *lz);
        }
      }
      return total;
    };
    auto make = [&](EstimatorKind k) {
      return std::function<std::optional<double>(double)>(
          [&combined, k](double tau) { return combined(k, tau); });
    };
    const auto lr = solve_with_ladder(ctrl.estimator, make,
                                      start_time(decv.H), log_tol_w);
    if (lr.time.status == CrossingStatus::no_admissible)
      throw NumericalError("propagate: no admissible step");
    s.estimator = lr.kind;
    s.fallbacks = lr.fallbacks;
    s.second_crossing = lr.time.second_crossing;
    s.tau = std::min(lr.time.t, remaining);
    s.log_zeta = combined(lr.kind, s.tau).value_or(lr.time.log_zeta);

    CVector next = CVector::Zero(op.n());
    if (decw) next = decw->propagator(w, 0, s.tau);
    for (int j = 0; j < p; ++j) {
      if (log_c[j] == kNegInf) continue;
      const double c = std::exp(log_c[j] + (j + 1) * std::log(s.tau));
      next += c * decv.propagator(v, j + 1, s.tau);
    }
    w = std::move(next);
    elapsed = s.tau >= remaining ? T : elapsed + s.tau;
    rep.substeps.push_back(std::move(s));
  }
  rep.result = w / std::pow(T, p);
  return rep;
}

}  // namespace kexp
