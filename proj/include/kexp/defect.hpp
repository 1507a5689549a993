#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kexp/common.hpp"
#include "kexp/krylov.hpp"
#include "kexp/small_dense.hpp"

namespace kexp {

enum class EstimatorKind {
  bound_real_part,
  bound_exact_real,
  bound_factorial,
  est_generalized_residual,
  est_effective_order,
  quadrature_oracle,
};

/// Stable names: real-part-bound, real-spectrum-bound, factorial-bound,
/// gen-residual, eff-order, quadrature.
std::string_view estimator_name(EstimatorKind k);
EstimatorKind parse_estimator(std::string_view name);
bool is_proven_bound(EstimatorKind k);
const std::vector<EstimatorKind>& all_estimators();

/// zeta_{p,m}(t). Values are kept as logs; `available` is false when the
/// estimator cannot be evaluated (reason in `note`).
struct ErrorEstimate {
  EstimatorKind kind = EstimatorKind::bound_real_part;
  double log_value = -std::numeric_limits<double>::infinity();
  bool is_proven_bound = false;
  bool available = true;
  double t = 0.0;
  int p = 0;
  Index m = 0;
  std::string note;

  double value() const { return std::exp(log_value); }
};

/// The small-dimensional data the defect depends on: H_m, beta,
/// h_{m+1,m}, gamma_m and the Ritz values, together with the order p.
class DefectModel {
 public:
  DefectModel(const KrylovDecomposition& dec, int p);
  /// Synthetic model from an upper Hessenberg H with nonzero subdiagonal.
  DefectModel(CMatrix h, double beta, double h_next, int p);

  const CMatrix& H() const { return h_; }
  Index m() const { return h_.rows(); }
  int p() const { return p_; }
  double beta() const { return beta_; }
  double h_next() const { return h_next_; }
  double log_gamma() const { return log_gamma_; }
  /// log(beta * h_{m+1,m})
  double log_beta_plus_h() const {
    return std::log(beta_) + std::log(h_next_);
  }
  Complex gamma_phase() const { return gamma_phase_; }
  const std::vector<Complex>& ritz() const { return ritz_; }
  /// Ritz values padded with p zeros.
  NodeSet nodes() const { return NodeSet(ritz_, p_); }
  double max_real_ritz() const;
  /// max |eta_j| <= 1e-10 * spectral radius of the Ritz values.
  bool real_spectrum() const;

 private:
  void init_gamma();

  CMatrix h_;
  int p_ = 0;
  double beta_ = 0.0;
  double h_next_ = 0.0;
  double log_gamma_ = 0.0;
  Complex gamma_phase_{1.0, 0.0};
  std::vector<Complex> ritz_;
};

/// delta_{p,m}(t) = beta e_m^* t^p phi_p(tH) e_1.
Complex defect(const DefectModel& dm, double t);
ScaledComplex defect_scaled(const DefectModel& dm, double t);
/// Same quantity as beta gamma_m exp_t[lambda_1..lambda_m, 0_p].
ScaledComplex defect_via_divided_differences(const DefectModel& dm, double t);

struct DefectEvaluation {
  int p = 0;
  double t = 0.0;
  std::vector<Complex> ritz;
  std::vector<double> xi;
  std::vector<double> eta;
  ScaledComplex value;
};
DefectEvaluation evaluate_defect(const DefectModel& dm, double t);

/// L_{p,m}(t) = (h/t^p) int_0^t |delta(s)| ds by adaptive Gauss-Kronrod.
struct DefectIntegral {
  double log_value = -std::numeric_limits<double>::infinity();
  double rel_error = 0.0;
  bool converged = true;
  int pieces = 0;
  double value() const { return std::exp(log_value); }
};
DefectIntegral defect_integral_quadrature(const DefectModel& dm, double t,
                                          double qtol = 1e-3);

ErrorEstimate bound_real_part(const DefectModel& dm, double t);
/// Throws InvalidArgument unless the Ritz values are numerically real.
ErrorEstimate bound_exact_real(const DefectModel& dm, double t);
/// xi_max must be <= 0, and 0 when p >= 1.
ErrorEstimate bound_factorial(const DefectModel& dm, double t,
                              double xi_max = 0.0);
ErrorEstimate est_generalized_residual(const DefectModel& dm, double t);
ErrorEstimate est_effective_order(const DefectModel& dm, double t);
ErrorEstimate quadrature_estimate(const DefectModel& dm, double t,
                                  double qtol = 1e-3);

/// rho(t) from entries of H and y_{p,m}(t); nullopt when (y)_m vanishes.
std::optional<double> effective_order_from_h(const DefectModel& dm, double t);

/// Dispatch by kind. For bound_factorial xi_max is min(max xi_j, 0) when
/// p = 0 and 0 otherwise.
ErrorEstimate evaluate_estimator(EstimatorKind kind, const DefectModel& dm,
                                 double t, double qtol = 1e-3);

/// var_p(eta) (m+p) t^2 / (2 (m+p+1)(m+p+2))
double accuracy_criterion_1(const DefectModel& dm, double t);
/// |rho1 (m+p) t/(m+p+1) + (rho1^2 + rho2)(m+p) t^2 / (2 (m+p+2))|
double accuracy_criterion_2(const DefectModel& dm, double t);

/// rho_1 and rho_2 from S_1 = trace H and S_2 = trace H^2 (Hessenberg
/// entries only).
std::pair<double, double> rho12_from_traces(const CMatrix& h, int p);

}  // namespace kexp
