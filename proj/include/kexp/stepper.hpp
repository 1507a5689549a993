#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kexp/defect.hpp"
#include "kexp/krylov.hpp"
#include "kexp/linops.hpp"

namespace kexp {

struct StepControl {
  double tol = 1e-8;  // per unit step
  EstimatorKind estimator = EstimatorKind::bound_real_part;
  Index m_max = 30;
  double t_final = 1.0;
  int p = 0;
  OrthPolicy policy{};
  double qtol = 1e-3;  // quadrature estimator only

  void validate() const;
};

enum class CrossingStatus {
  found,
  unbounded,        // zeta(t) < t tol on all of [1e-12, 1e12] t0
  no_admissible,    // zeta(t) >= t tol already at 1e-12 t0
  unavailable,      // estimator could not be evaluated
};

struct TimeOfM {
  CrossingStatus status = CrossingStatus::found;
  /// Largest bracketed t with zeta(t) <= t tol (relative width 1e-6).
  double t = 0.0;
  double log_zeta = -std::numeric_limits<double>::infinity();
  /// zeta(t)/t dips below tol again within 10 t.
  bool second_crossing = false;
  int evaluations = 0;
};

/// Smallest t with log_zeta(t) = log t + log_tol; log_zeta returns nullopt
/// where the estimate is unavailable.
TimeOfM solve_crossing(const std::function<std::optional<double>(double)>& log_zeta,
                       double t0, double log_tol);

TimeOfM solve_t_of_m(const DefectModel& dm, EstimatorKind kind, double tol,
                     double qtol = 1e-3);
TimeOfM solve_t_of_m(const KrylovDecomposition& dec, const StepControl& ctrl);

/// beta h_{k+1,k} / (p+1)! <= tol
bool lucky_breakdown_check(double beta, double h_next, int p, double tol);

struct Substep {
  double t_start = 0.0;
  double tau = 0.0;
  Index m = 0;
  EstimatorKind estimator = EstimatorKind::bound_real_part;
  double log_zeta = -std::numeric_limits<double>::infinity();
  bool breakdown = false;
  bool lucky_stop = false;
  bool second_crossing = false;
  std::vector<std::string> fallbacks;
};

struct PropagationReport {
  std::vector<Substep> substeps;
  Index matvecs = 0;
  CVector result;
  double t_final = 0.0;
  int p = 0;
  double tol = 0.0;

  double total_time() const;
  /// JSON document; the result vector is included when requested.
  std::string to_json(bool include_result = false) const;
};

/// phi_p(t_final A) v by restarted Krylov substeps of admissible length
/// t(m_max). For p >= 1 the substeps follow the variation-of-constants
/// recurrence for w(t) = t^p phi_p(tA) v.
PropagationReport propagate(const LinearOperator& op, const CVector& v,
                            const StepControl& ctrl);

}  // namespace kexp
