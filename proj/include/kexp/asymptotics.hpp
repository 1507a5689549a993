#pragma once

#include <vector>

#include "kexp/common.hpp"
#include "kexp/small_dense.hpp"

namespace kexp {

/// S_l = sum over padded nodes of lambda^l for l = 0..L (S_0 = node count),
/// plus the mixed real sums S_lk = sum xi^l eta^k used by the variance
/// formulas.
struct PowerSums {
  std::vector<Complex> s;
  double s10 = 0.0, s01 = 0.0, s20 = 0.0, s02 = 0.0, s11 = 0.0;

  Complex operator[](int l) const { return s.at(static_cast<std::size_t>(l)); }
};

PowerSums power_sums(const NodeSet& ns, int L);

/// Divided difference of z^{M-1+k} over the M padded nodes, i.e. the
/// (M,1) entry of Theta^{M-1+k}.
Complex kappa(const NodeSet& ns, int k);

/// alpha_0 = 1, ..., alpha_K: coefficients of
/// |exp_t[nodes]|^2 = (t^{M-1}/(M-1)!)^2 sum_k alpha_k t^k.
std::vector<double> alpha_coeffs(const NodeSet& ns, int K);

/// rho(t) = M - 1 + sum_{k=1}^K rho_k t^k, the effective order of
/// |exp_t[nodes]| near t = 0.
struct AsymptoticExpansion {
  int order = 0;
  std::vector<double> rho;  // rho_1..rho_K
  Index m_eff = 0;
  double leading_log_coeff = 0.0;  // -log (m_eff - 1)!

  /// Effective order from the truncated series.
  double effective_order(double t) const;
  /// log of t^{M-1}/(M-1)! exp(sum rho_k t^k / k).
  double log_norm(double t) const;
};

AsymptoticExpansion rho_coeffs(const NodeSet& ns, int K);

/// Truncated K-term expansion of |exp_t[nodes]|, evaluated in logs.
double asymptotic_defect_norm(const NodeSet& ns, double t, int K);
double asymptotic_defect_log_norm(const NodeSet& ns, double t, int K);

/// Padded averages and variances of the real parts xi and imaginary parts
/// eta; the p padding zeros enter through the p*avg^2 term.
struct NodeStats {
  double avg_xi = 0.0;
  double var_xi = 0.0;
  double avg_eta = 0.0;
  double var_eta = 0.0;
};
NodeStats avg_var_stats(const NodeSet& ns);

/// t d/dt log |exp_t[nodes]| by fourth-order central differences in log t.
double effective_order_exact(const NodeSet& ns, double t,
                             double log_step = 1e-3);

}  // namespace kexp
