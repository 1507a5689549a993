#include "kexp/asymptotics.hpp"

#include <cmath>

namespace kexp {

PowerSums power_sums(const NodeSet& ns, int L) {
  if (L < 1) throw InvalidArgument("power_sums: L must be >= 1");
  PowerSums ps;
  ps.s.assign(static_cast<std::size_t>(L) + 1, Complex{});
  for (const Complex& z : ns.padded()) {
    Complex pw = 1.0;
    for (int l = 0; l <= L; ++l) {
      ps.s[l] += pw;
      pw *= z;
    }
    const double x = z.real(), y = z.imag();
    ps.s10 += x;
    ps.s01 += y;
    ps.s20 += x * x;
    ps.s02 += y * y;
    ps.s11 += x * y;
  }
  return ps;
}

Complex kappa(const NodeSet& ns, int k) {
  if (k < 0) throw InvalidArgument("kappa: k must be >= 0");
  const auto nodes = ns.padded();
  const std::size_t M = nodes.size();
  std::vector<Complex> x(M, Complex{});
  x[0] = 1.0;
  const std::size_t steps = M - 1 + static_cast<std::size_t>(k);
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t i = M; i-- > 0;)
      x[i] = nodes[i] * x[i] + (i > 0 ? x[i - 1] : Complex{});
  return x[M - 1];
}

std::vector<double> alpha_coeffs(const NodeSet& ns, int K) {
  if (K < 0) throw InvalidArgument("alpha_coeffs: K must be >= 0");
  const double M = static_cast<double>(ns.size());
  std::vector<Complex> c(static_cast<std::size_t>(K) + 1);
  double denom = 1.0;  // prod_{i=1}^{j} (M-1+i)
  for (int j = 0; j <= K; ++j) {
    if (j > 0) denom *= M - 1.0 + j;
    c[j] = kappa(ns, j) / denom;
  }
  std::vector<double> alpha(static_cast<std::size_t>(K) + 1, 0.0);
  for (int k = 0; k <= K; ++k)
    for (int j = 0; j <= k; ++j)
      alpha[k] += (c[j] * std::conj(c[k - j])).real();
  return alpha;
}

AsymptoticExpansion rho_coeffs(const NodeSet& ns, int K) {
  if (K < 1) throw InvalidArgument("rho_coeffs: K must be >= 1");
  const auto alpha = alpha_coeffs(ns, K);
  AsymptoticExpansion e;
  e.order = K;
  e.m_eff = ns.size();
  e.leading_log_coeff = -std::lgamma(static_cast<double>(e.m_eff));
  std::vector<double> rho(static_cast<std::size_t>(K) + 1, 0.0);
  for (int k = 1; k <= K; ++k) {
    double r = 0.5 * k * alpha[k];
    for (int l = 1; l <= k - 1; ++l) r -= alpha[l] * rho[k - l];
    rho[k] = r;
  }
  e.rho.assign(rho.begin() + 1, rho.end());
  return e;
}

double AsymptoticExpansion::effective_order(double t) const {
  double r = static_cast<double>(m_eff - 1), tk = 1.0;
  for (double rk : rho) {
    tk *= t;
    r += rk * tk;
  }
  return r;
}

double AsymptoticExpansion::log_norm(double t) const {
  if (!(t > 0.0)) throw InvalidArgument("asymptotic expansion needs t > 0");
  double s = 0.0, tk = 1.0;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    tk *= t;
    s += rho[k] * tk / static_cast<double>(k + 1);
  }
  return static_cast<double>(m_eff - 1) * std::log(t) + leading_log_coeff + s;
}

double asymptotic_defect_log_norm(const NodeSet& ns, double t, int K) {
  return rho_coeffs(ns, K).log_norm(t);
}

double asymptotic_defect_norm(const NodeSet& ns, double t, int K) {
  return std::exp(asymptotic_defect_log_norm(ns, t, K));
}

NodeStats avg_var_stats(const NodeSet& ns) {
  const double M = static_cast<double>(ns.size());
  const double p = static_cast<double>(ns.padding);
  NodeStats st;
  for (const Complex& z : ns.nodes) {
    st.avg_xi += z.real();
    st.avg_eta += z.imag();
  }
  st.avg_xi /= M;
  st.avg_eta /= M;
  for (const Complex& z : ns.nodes) {
    st.var_xi += (z.real() - st.avg_xi) * (z.real() - st.avg_xi);
    st.var_eta += (z.imag() - st.avg_eta) * (z.imag() - st.avg_eta);
  }
  st.var_xi = (st.var_xi + p * st.avg_xi * st.avg_xi) / M;
  st.var_eta = (st.var_eta + p * st.avg_eta * st.avg_eta) / M;
  return st;
}

double effective_order_exact(const NodeSet& ns, double t, double log_step) {
  if (!(t > 0.0)) throw InvalidArgument("effective_order_exact: t must be > 0");
  auto f = [&](double u) {
    const double v = divided_differences_exp_scaled(ns, std::exp(u)).log_abs();
    if (!std::isfinite(v))
      throw NumericalError("effective_order_exact: |exp_t[...]| underflows");
    return v;
  };
  const double u = std::log(t), h = log_step;
  return (-f(u + 2 * h) + 8 * f(u + h) - 8 * f(u - h) + f(u - 2 * h)) /
         (12 * h);
}

}  // namespace kexp
