#include "doctest.h"
#include "kexp/asymptotics.hpp"
#include "kexp/defect.hpp"
#include "kexp/reference.hpp"
#include "oracles.hpp"

using namespace kexp;

namespace {

double true_error(const LinearOperator& op, const KrylovDecomposition& dec,
                  const CVector& v, double t, int p) {
  const CVector exact = ReferencePhi::for_operator(op)(v, t, p);
  const CVector approx = dec.lift(phi_action(dec.H, p, t, 1.0));
  return (exact - approx).norm();
}

}  // namespace

TEST_CASE("estimator names") {
  for (auto k : all_estimators())
    CHECK(parse_estimator(estimator_name(k)) == k);
  CHECK(all_estimators().size() == 6);
  CHECK(is_proven_bound(EstimatorKind::bound_real_part));
  CHECK(is_proven_bound(EstimatorKind::bound_exact_real));
  CHECK(is_proven_bound(EstimatorKind::bound_factorial));
  CHECK_FALSE(is_proven_bound(EstimatorKind::est_generalized_residual));
  CHECK_FALSE(is_proven_bound(EstimatorKind::est_effective_order));
  CHECK_THROWS_AS(parse_estimator("nope"), InvalidArgument);
}

TEST_CASE("DefectModel validation") {
  CMatrix h = CMatrix::Zero(2, 2);
  CHECK_THROWS_AS(DefectModel(h, 1.0, 1.0, 0), InvalidArgument);
  h(1, 0) = 1.0;
  CHECK_NOTHROW(DefectModel(h, 1.0, 1.0, 0));
  CHECK_THROWS_AS(DefectModel(h, 0.0, 1.0, 0), InvalidArgument);
  CHECK_THROWS_AS(DefectModel(h, 1.0, 1.0, -1), InvalidArgument);
  CHECK_THROWS_AS(DefectModel(CMatrix::Zero(2, 3), 1.0, 1.0, 0),
                  InvalidArgument);
}

TEST_CASE("three formulations of the defect agree") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const Index m = 1 + trial % 9;
    const int p = trial % 3;
    const DefectModel dm(oracle::random_hessenberg(m, rng), 1.3, 0.7, p);
    for (double t : {0.01, 0.5, 3.0}) {
      const ScaledComplex a = defect_scaled(dm, t);
      const ScaledComplex b = defect_via_divided_differences(dm, t);
      const Complex direct =
          1.3 * std::pow(t, p) * phi_action(dm.H(), p, t, 1.0)[m - 1];
      CHECK(oracle::rel_err(a.value(), direct) <= 1e-11);
      CHECK(std::abs(a.log_abs() - b.log_abs()) <= 1e-8);
      CHECK(std::abs(a.value() - b.value()) <= 1e-8 * std::abs(a.value()));
      CHECK(oracle::rel_err(defect(dm, t), direct) <= 1e-11);
    }
  }
}

TEST_CASE("defect is the residual coefficient") {
  // A u_m - u_m' = h_{m+1,m} sigma v_{m+1} delta(t) for u_m = beta V exp(tH) e1
  std::mt19937_64 rng(32);
  const CMatrix a = 0.3 * oracle::random_matrix(40, rng);
  const auto op = LinearOperator::from_dense(a, Structure::general);
  const CVector v = oracle::random_vector(op.n(), rng);
  const auto dec = arnoldi(op, v, 6);
  const DefectModel dm(dec, 0);
  auto u = [&](double s) { return dec.lift(phi_action(dec.H, 0, s, 1.0)); };
  for (double t : {0.2, 1.0}) {
    const double h = 1e-3;
    const CVector deriv =
        (-u(t + 2 * h) + 8.0 * u(t + h) - 8.0 * u(t - h) + u(t - 2 * h)) /
        (12.0 * h);
    const CVector r = op.apply(u(t)) - deriv;
    const double expect = dec.h_next * std::abs(defect(dm, t));
    CHECK(std::abs(r.norm() - expect) <= 1e-6 * expect);
  }
}

TEST_CASE("proven bounds dominate the true error") {
  const auto lap = build_laplacian_1d(300);
  const auto cd = build_convection_diffusion_2d(15, 20.0);
  for (const LinearOperator* op : {&lap, &cd}) {
    std::mt19937_64 rng(33);
    const CVector v = oracle::random_vector(op->n(), rng);
    const double scale = 1.0 / op->norm2_estimate();
    // errors below this are rounding in the reference and the projection
    const double floor = 1e-13 * v.norm();
    for (Index m : {4, 8, 14}) {
      const auto dec = arnoldi(*op, v, m);
      for (int p : {0, 1, 2}) {
        const DefectModel dm(dec, p);
        for (double t : {0.5 * scale, 2.0 * scale, 8.0 * scale}) {
          const double err = true_error(*op, dec, v, t, p);
          const double q = defect_integral_quadrature(dm, t, 1e-6).value();
          CHECK(err <= q * (1.0 + 1e-5) + floor);
          CHECK(q <= bound_real_part(dm, t).value() * (1.0 + 1e-6));
          CHECK(err <= bound_factorial(dm, t).value() * (1.0 + 1e-6) + floor);
          if (dm.real_spectrum()) {
            // |exp_s[xi, 0_p]| has constant sign, so the integral is exact
            const double ex = bound_exact_real(dm, t).value();
            CHECK(std::abs(ex - q) <= 1e-5 * q);
          }
        }
      }
    }
  }
}

TEST_CASE("quadrature converges on oscillating defects") {
  const auto s = build_schrodinger_double_well(256);
  const auto dec = krylov(s.propagator, s.initial_state, 12);
  const DefectModel dm(dec, 0);
  const double t = 20.0 / s.propagator.norm2_estimate();
  const auto coarse = defect_integral_quadrature(dm, t, 1e-3);
  const auto fine = defect_integral_quadrature(dm, t, 1e-9);
  CHECK(coarse.converged);
  CHECK(fine.converged);
  CHECK(std::abs(coarse.value() - fine.value()) <= 3e-3 * fine.value());
  CHECK(true_error(s.propagator, dec, s.initial_state, t, 0) <=
        fine.value() * (1.0 + 1e-6) + 1e-13);
  CHECK(fine.value() <= bound_real_part(dm, t).value() * (1.0 + 1e-8));
}

TEST_CASE("factorial bound validation") {
  std::mt19937_64 rng(34);
  const DefectModel d0(oracle::random_hessenberg(4, rng), 1.0, 1.0, 0);
  const DefectModel d1(oracle::random_hessenberg(4, rng), 1.0, 1.0, 1);
  CHECK_THROWS_AS(bound_factorial(d0, 1.0, 0.5), InvalidArgument);
  CHECK_NOTHROW(bound_factorial(d0, 1.0, -0.5));
  CHECK(bound_factorial(d0, 1.0, -0.5).log_value ==
        doctest::Approx(bound_factorial(d0, 1.0).log_value - 0.5));
  CHECK_THROWS_AS(bound_factorial(d1, 1.0, -0.5), InvalidArgument);
  CHECK_THROWS_AS(bound_real_part(d0, -1.0), InvalidArgument);
}

TEST_CASE("exact-real bound needs a real spectrum") {
  CMatrix rot(2, 2);
  rot << 0.0, -1.0, 1.0, 0.0;
  const DefectModel dm(rot, 1.0, 1.0, 0);
  CHECK_FALSE(dm.real_spectrum());
  CHECK_THROWS_AS(bound_exact_real(dm, 1.0), InvalidArgument);
  const auto e = evaluate_estimator(EstimatorKind::bound_exact_real, dm, 1.0);
  CHECK_FALSE(e.available);
}

TEST_CASE("effective order from H matches the log derivative") {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 40; ++trial) {
    const Index m = 2 + trial % 6;
    const int p = trial % 3;
    const DefectModel dm(
        oracle::shift_dissipative(oracle::random_hessenberg(m, rng)), 1.0,
        1.0, p);
    for (double t : {0.05, 0.4, 1.5}) {
      const auto rho = effective_order_from_h(dm, t);
      REQUIRE(rho.has_value());
      // t d/dt log|delta| for delta = beta gamma exp_t[lambda, 0_p]
      const double exact = effective_order_exact(dm.nodes(), t);
      CHECK(std::abs(*rho - exact) <= 1e-6 * (1.0 + std::abs(exact)));
    }
  }
  // t -> 0: rho -> m + p - 1
  const DefectModel dm(oracle::random_hessenberg(5, rng), 1.0, 1.0, 2);
  CHECK(*effective_order_from_h(dm, 1e-8) == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("generalized residual and effective order") {
  std::mt19937_64 rng(36);
  const DefectModel dm(oracle::random_hessenberg(6, rng), 2.0, 0.5, 1);
  const double t = 0.3;
  const auto g = est_generalized_residual(dm, t);
  CHECK(g.value() == doctest::Approx(0.5 * std::abs(defect(dm, t))).epsilon(1e-12));
  const auto e = est_effective_order(dm, t);
  REQUIRE(e.available);
  const double rho = *effective_order_from_h(dm, t);
  CHECK(e.value() == doctest::Approx(g.value() / (rho + 1.0)).epsilon(1e-12));
  // integral of s^rho: exact when |delta| is a pure power
  CMatrix nil = CMatrix::Zero(4, 4);
  for (Index i = 0; i + 1 < 4; ++i) nil(i + 1, i) = 1.0;
  const DefectModel pw(nil, 1.0, 1.0, 1);
  for (double s : {0.1, 1.0, 7.0})
    CHECK(est_effective_order(pw, s).value() ==
          doctest::Approx(quadrature_estimate(pw, s, 1e-10).value())
              .epsilon(1e-8));
}

TEST_CASE("effective order unavailable when rho + 1 <= 0") {
  CMatrix h(1, 1);
  h(0, 0) = -10.0;
  const DefectModel dm(h, 1.0, 1.0, 0);
  const auto e = est_effective_order(dm, 1.0);
  CHECK_FALSE(e.available);
  CHECK_FALSE(e.note.empty());
}

TEST_CASE("trace formulas match the power-sum expansion") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    const Index m = 1 + trial % 7;
    const int p = trial % 3;
    const DefectModel dm(oracle::random_hessenberg(m, rng), 1.0, 1.0, p);
    const auto [r1, r2] = rho12_from_traces(dm.H(), p);
    const auto ex = rho_coeffs(dm.nodes(), 2);
    CHECK(r1 == doctest::Approx(ex.rho[0]).epsilon(1e-9));
    CHECK(r2 == doctest::Approx(ex.rho[1]).epsilon(1e-9));
  }
}

TEST_CASE("accuracy criteria") {
  const auto lap = build_laplacian_1d(100);
  std::mt19937_64 rng(38);
  const auto dec = lanczos(lap, oracle::random_vector(100, rng), 10);
  const DefectModel dm(dec, 0);
  CHECK(accuracy_criterion_1(dm, 1.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(accuracy_criterion_2(dm, 0.0) == 0.0);
  // second criterion grows with t and tracks the effective-order drift
  const double a = accuracy_criterion_2(dm, 0.01);
  const double b = accuracy_criterion_2(dm, 0.1);
  CHECK(a < b);
  const double drift = std::abs(*effective_order_from_h(dm, 0.01) - 9.0);
  CHECK(a == doctest::Approx(drift).epsilon(0.05));
}
