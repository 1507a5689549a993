#include "doctest.h"
#include "kexp/asymptotics.hpp"
#include "oracles.hpp"

using namespace kexp;

namespace {

// complete homogeneous symmetric polynomial h_k by enumeration
Complex homogeneous(const std::vector<Complex>& z, int k, std::size_t from = 0) {
  if (k == 0) return 1.0;
  Complex s = 0.0;
  for (std::size_t i = from; i < z.size(); ++i)
    s += z[i] * homogeneous(z, k - 1, i);
  return s;
}

}  // namespace

TEST_CASE("power sums and node statistics") {
  const NodeSet ns({Complex(1, 2), Complex(3, 0)}, 1);
  const auto ps = power_sums(ns, 3);
  CHECK(ps[0] == Complex(3.0));
  CHECK(std::abs(ps[1] - Complex(4, 2)) < 1e-15);
  CHECK(std::abs(ps[2] - (Complex(1, 2) * Complex(1, 2) + 9.0)) < 1e-14);
  CHECK(ps.s10 == 4.0);
  CHECK(ps.s02 == 4.0);
  CHECK(ps.s11 == 2.0);

  const auto st = avg_var_stats(ns);
  CHECK(st.avg_xi == doctest::Approx(4.0 / 3.0));
  CHECK(st.var_xi == doctest::Approx(14.0 / 9.0));
  CHECK(st.avg_eta == doctest::Approx(2.0 / 3.0));
  CHECK(st.var_eta == doctest::Approx(8.0 / 9.0));
}

TEST_CASE("kappa is the complete homogeneous polynomial") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Complex> z;
    for (int i = 0; i < 3; ++i) z.push_back(oracle::crandn(rng));
    const int p = trial % 3;
    const NodeSet ns(z, p);
    const auto padded = ns.padded();
    for (int k = 0; k <= 5; ++k)
      CHECK(std::abs(kappa(ns, k) - homogeneous(padded, k)) <=
            1e-12 * (1.0 + std::abs(homogeneous(padded, k))));
  }
}

TEST_CASE("closed forms") {
  // one node: |exp(t lambda)| = exp(t xi), effective order t xi
  const Complex lambda(-0.7, 3.0);
  const auto one = rho_coeffs(NodeSet({lambda}), 6);
  const auto alpha = alpha_coeffs(NodeSet({lambda}), 6);
  double fact = 1.0;
  for (int k = 0; k <= 6; ++k) {
    if (k > 0) fact *= k;
    CHECK(alpha[k] == doctest::Approx(std::pow(2.0 * lambda.real(), k) / fact));
  }
  CHECK(one.rho[0] == doctest::Approx(lambda.real()));
  for (int k = 1; k < 6; ++k) CHECK(std::abs(one.rho[k]) <= 1e-13);

  // repeated node: exp_t[lambda x M] = t^{M-1}/(M-1)! exp(t lambda)
  const auto rep = rho_coeffs(NodeSet({lambda, lambda, lambda}, 0), 5);
  CHECK(rep.m_eff == 3);
  CHECK(rep.rho[0] == doctest::Approx(lambda.real()));
  for (int k = 1; k < 5; ++k) CHECK(std::abs(rep.rho[k]) <= 1e-12);
  const double t = 0.8;
  CHECK(rep.log_norm(t) ==
        doctest::Approx(2.0 * std::log(t) - std::log(2.0) + t * lambda.real()));

  const auto zero = rho_coeffs(NodeSet({Complex{}}, 4), 4);
  for (double r : zero.rho) CHECK(r == 0.0);
  CHECK(zero.effective_order(5.0) == 4.0);
}

TEST_CASE("alpha expansion of the squared modulus") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Complex> z;
    for (int i = 0; i < 1 + trial % 5; ++i) z.push_back(oracle::crandn(rng));
    const NodeSet ns(z, trial % 3);
    const int M = static_cast<int>(ns.size());
    const int K = 6;
    const auto alpha = alpha_coeffs(ns, K);
    CHECK(alpha[0] == doctest::Approx(1.0));
    for (double t : {0.02, 0.05}) {
      const double lead = (M - 1) * std::log(t) - std::lgamma(double(M));
      const double exact =
          std::exp(2.0 * (divided_differences_exp_scaled(ns, t).log_abs() - lead));
      double series = 0.0;
      for (int k = 0; k <= K; ++k) series += alpha[k] * std::pow(t, k);
      CHECK(std::abs(series - exact) <= 1e-9 * exact);
    }
  }
}

TEST_CASE("truncated effective order converges at the predicted rate") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Complex> z;
    for (int i = 0; i < 2 + trial % 4; ++i) z.push_back(oracle::crandn(rng));
    const NodeSet ns(z, trial % 2);
    const auto longer = rho_coeffs(ns, 10);
    for (double t : {0.05, 0.1}) {
      const double exact = effective_order_exact(ns, t);
      CHECK(std::abs(longer.effective_order(t) - exact) <= 1e-9);
      for (int K : {1, 2, 3}) {
        // truncation error is the tail sum_{k>K} rho_k t^k
        double tail = 0.0;
        for (int k = K + 1; k <= 10; ++k) tail += longer.rho[k - 1] * std::pow(t, k);
        const double err = exact - rho_coeffs(ns, K).effective_order(t);
        CHECK(std::abs(err - tail) <= 1e-9);
      }
    }
    CHECK(std::abs(longer.log_norm(0.05) -
                   divided_differences_exp_scaled(ns, 0.05).log_abs()) <= 1e-10);
  }
}

TEST_CASE("asymptotic norm helpers") {
  const NodeSet ns({Complex(-1.0, 0.5), Complex(-2.0, -0.3)}, 1);
  CHECK(asymptotic_defect_norm(ns, 0.1, 4) ==
        doctest::Approx(std::exp(asymptotic_defect_log_norm(ns, 0.1, 4))));
  CHECK(std::abs(asymptotic_defect_log_norm(ns, 0.01, 4) -
                 divided_differences_exp_scaled(ns, 0.01).log_abs()) <= 1e-10);
  CHECK_THROWS_AS(rho_coeffs(ns, 0), InvalidArgument);
  CHECK_THROWS_AS(rho_coeffs(ns, 2).log_norm(0.0), InvalidArgument);
  CHECK_THROWS_AS(kappa(ns, -1), InvalidArgument);
}
