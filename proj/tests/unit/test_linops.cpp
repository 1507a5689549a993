#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "kexp/krylov.hpp"
#include "kexp/linops.hpp"
#include "oracles.hpp"

using namespace kexp;

namespace {

SparseMatrixCSR random_csr(Index n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SparseMatrixCSR::Entry> e;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (u(rng) < density) e.push_back({i, j, oracle::crandn(rng)});
  return SparseMatrixCSR::from_entries(n, e);
}

std::vector<double> sorted_eigs(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(a, Eigen::EigenvaluesOnly);
  std::vector<double> v(es.eigenvalues().data(),
                        es.eigenvalues().data() + a.rows());
  std::sort(v.begin(), v.end());
  return v;
}

double numeric_asymmetry(const CMatrix& a, double sign) {
  return (a - sign * a.adjoint()).norm() / a.norm();
}

}  // namespace

TEST_CASE("matvec on identity and the 1D stencil") {
  const auto id = LinearOperator::from_dense(CMatrix::Identity(4, 4));
  CVector e1 = CVector::Zero(4);
  e1[0] = 1.0;
  CHECK((matvec(id, e1) - e1).norm() == 0.0);

  const auto lap = build_laplacian_1d(3);
  const CVector y = matvec(lap, CVector::Ones(3));
  CHECK(std::abs(y[0] - Complex(-1.0)) < 1e-15);
  CHECK(std::abs(y[1]) < 1e-15);
  CHECK(std::abs(y[2] - Complex(-1.0)) < 1e-15);

  CHECK_THROWS_AS(matvec(lap, CVector::Ones(4)), InvalidArgument);
}

TEST_CASE("CSR multiply agrees with dense multiply") {
  std::mt19937_64 rng(11);
  const auto csr = random_csr(50, 0.2, rng);
  const CMatrix dense = csr.to_dense();
  const auto op = LinearOperator::from_csr(csr);
  const CVector x = oracle::random_vector(50, rng);
  const CVector ref = dense * x;
  CHECK((op.apply(x) - ref).norm() <= 1e-13 * ref.norm());
  const CVector ref_adj = dense.adjoint() * x;
  CHECK((op.apply_adjoint(x) - ref_adj).norm() <= 1e-13 * ref_adj.norm());
}

TEST_CASE("CSR validation rejects malformed storage") {
  SparseMatrixCSR a;
  a.n = 2;
  a.row_offsets = {0, 2, 1};
  a.col_indices = {0, 1};
  a.values = {1.0, 1.0};
  CHECK_THROWS_AS(a.validate(), InvalidArgument);
  a.row_offsets = {0, 1, 2};
  a.col_indices = {0, 5};
  CHECK_THROWS_AS(a.validate(), InvalidArgument);
  a.col_indices = {0, 1};
  a.row_offsets = {0, 1, 3};
  CHECK_THROWS_AS(a.validate(), InvalidArgument);
}

TEST_CASE("from_entries sums duplicates") {
  const auto a = SparseMatrixCSR::from_entries(
      2, {{1, 0, 2.0}, {0, 1, 1.0}, {1, 0, 3.0}});
  const CMatrix d = a.to_dense();
  CHECK(d(1, 0) == Complex(5.0));
  CHECK(d(0, 1) == Complex(1.0));
  CHECK(a.nnz() == 2);
}

TEST_CASE("laplacian_1d: small case and closed-form spectrum") {
  const auto b2 = build_laplacian_1d(2);
  const CMatrix d2 = b2.to_dense();
  CHECK(d2(0, 0) == Complex(-2.0));
  CHECK(d2(0, 1) == Complex(1.0));
  const auto e2 = sorted_eigs(d2);
  CHECK(e2[0] == doctest::Approx(-3.0).epsilon(1e-14));
  CHECK(e2[1] == doctest::Approx(-1.0).epsilon(1e-14));

  for (Index n : {10, 100, 200}) {
    const auto ev = sorted_eigs(-build_laplacian_1d(n).to_dense());
    for (Index j = 1; j <= n; ++j) {
      const double s =
          std::pow(std::sin(j * std::numbers::pi / (2.0 * (n + 1))), 2);
      CHECK(std::abs(ev[j - 1] - 4.0 * s) <= 1e-12);
    }
  }
  const auto ev = sorted_eigs(-build_laplacian_1d(100).to_dense());
  CHECK(std::abs(ev.back() -
                 4.0 * std::pow(std::sin(100 * std::numbers::pi / 202.0), 2)) <=
        1e-12);
  CHECK_THROWS_AS(build_laplacian_1d(1), InvalidArgument);
}

TEST_CASE("convection-diffusion operator") {
  SUBCASE("nu = 0 is symmetric negative definite") {
    const auto a = build_convection_diffusion_2d(3, 0.0);
    CHECK(a.structure() == Structure::hermitian);
    const CMatrix d = a.to_dense();
    CHECK(numeric_asymmetry(d, 1.0) == 0.0);
    CHECK(sorted_eigs(d).back() < 0.0);
  }
  SUBCASE("nu = 100 has nonpositive logarithmic norm") {
    const auto a = build_convection_diffusion_2d(20, 100.0);
    CHECK(a.structure() == Structure::general);
    const CMatrix d = a.to_dense();
    const double mu = sorted_eigs(0.5 * (d + d.adjoint())).back();
    CHECK(mu <= 0.0);
    CHECK(a.mu2_estimate() <= 1e-8);
    CHECK(a.mu2_estimate() == doctest::Approx(mu).epsilon(1e-3));
  }
  SUBCASE("Kronecker structure T (x) I + I (x) T") {
    const Index N = 4;
    const auto a = build_convection_diffusion_2d(N, 37.0);
    REQUIRE(a.kronecker_factor() != nullptr);
    const RMatrix& t = *a.kronecker_factor();
    const RMatrix id = RMatrix::Identity(N, N);
    RMatrix k = RMatrix::Zero(N * N, N * N);
    for (Index i = 0; i < N; ++i)
      for (Index j = 0; j < N; ++j) {
        k.block(i * N, j * N, N, N) += t(i, j) * id;
        k.block(i * N, j * N, N, N) += (i == j ? 1.0 : 0.0) * t;
      }
    CHECK((a.to_dense() - k.cast<Complex>()).norm() <= 1e-12 * k.norm());
  }
  CHECK_THROWS_AS(build_convection_diffusion_2d(1, 0.0), InvalidArgument);
}

TEST_CASE("Schrodinger double well") {
  const auto prob = build_schrodinger_double_well(200);
  CHECK(std::abs(prob.initial_state.norm() - 1.0) <= 1e-14);
  const CMatrix b = prob.hamiltonian.to_dense();
  CHECK(numeric_asymmetry(b, 1.0) <= 1e-12);
  CHECK(prob.propagator.structure() == Structure::skew_hermitian);
  CHECK(prob.propagator.mu2_estimate() == 0.0);
  const CMatrix a = prob.propagator.to_dense();
  CHECK((a + Complex(0, 1) * b).norm() <= 1e-12 * b.norm());

  // extreme eigenvalue: dense solver vs Lanczos
  const auto ev = sorted_eigs(b);
  OrthPolicy pol;
  pol.scheme = OrthScheme::full_reorth;
  const auto dec = lanczos(prob.hamiltonian, prob.initial_state, 150, pol);
  double lo = 1e300;
  for (const auto& z : dec.ritz()) lo = std::min(lo, z.real());
  CHECK(std::abs(lo - ev.front()) <= 1e-8 * std::abs(ev.front()));
  CHECK_THROWS_AS(build_schrodinger_double_well(3), InvalidArgument);
}

TEST_CASE("structure flags match numeric symmetry of the dense matrix") {
  const auto lap = build_laplacian_1d(40).to_dense();
  CHECK(numeric_asymmetry(lap, 1.0) == 0.0);
  const auto cd = build_convection_diffusion_2d(6, 50.0).to_dense();
  CHECK(numeric_asymmetry(cd, 1.0) > 1e-3);
  CHECK(numeric_asymmetry(cd, -1.0) > 1e-3);
  const auto sk = build_schrodinger_double_well(64).propagator.to_dense();
  CHECK(numeric_asymmetry(sk, -1.0) <= 1e-14);

  std::mt19937_64 rng(3);
  const CMatrix r = oracle::random_matrix(8, rng);
  CHECK(LinearOperator::from_dense(r + r.adjoint()).structure() ==
        Structure::hermitian);
  CHECK(LinearOperator::from_dense(r - r.adjoint()).structure() ==
        Structure::skew_hermitian);
  CHECK(LinearOperator::from_dense(r).structure() == Structure::general);
}

TEST_CASE("operator invariants on sampled vectors") {
  std::mt19937_64 rng(5);
  const auto lap = build_laplacian_1d(60);
  const auto sk = build_schrodinger_double_well(60).propagator;
  for (int trial = 0; trial < 10; ++trial) {
    const CVector x = oracle::random_vector(60, rng);
    const CVector y = oracle::random_vector(60, rng);
    const Complex a = oracle::crandn(rng), b = oracle::crandn(rng);
    const CVector lhs = lap.apply(a * x + b * y);
    const CVector rhs = a * lap.apply(x) + b * lap.apply(y);
    CHECK((lhs - rhs).norm() <= 1e-13 * rhs.norm());

    const double tol = 1e-12 * lap.norm2_estimate() * x.norm() * y.norm();
    CHECK(std::abs(x.dot(lap.apply(y)) - std::conj(y.dot(lap.apply(x)))) <=
          tol);
    const double tol_s = 1e-12 * sk.norm2_estimate() * x.squaredNorm();
    CHECK(std::abs(x.dot(sk.apply(x)).real()) <= tol_s);
  }
}

TEST_CASE("norm estimate") {
  const auto lap = build_laplacian_1d(50);
  const double exact = 4.0 * std::pow(std::sin(50 * std::numbers::pi / 102.0), 2);
  CHECK(lap.norm2_estimate() <= exact * (1 + 1e-12));
  CHECK(lap.norm2_estimate() >= 0.9 * exact);
}

TEST_CASE("Matrix Market parsing") {
  SUBCASE("symmetric 2x2") {
    const auto a = parse_matrix_market(
        "%%MatrixMarket matrix coordinate real symmetric\n"
        "% comment\n"
        "2 2 3\n"
        "1 1 -2\n2 1 1\n2 2 -2\n");
    const CMatrix d = a.to_dense();
    CMatrix ref(2, 2);
    ref << -2.0, 1.0, 1.0, -2.0;
    CHECK((d - ref).norm() == 0.0);
  }
  SUBCASE("entry above the diagonal is mirrored too") {
    const auto a = parse_matrix_market(
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 3\n");
    CHECK(a.to_dense()(1, 0) == Complex(3.0));
  }
  SUBCASE("empty matrix") {
    const auto a = parse_matrix_market(
        "%%MatrixMarket matrix coordinate real general\n3 3 0\n");
    CHECK(a.nnz() == 0);
    const auto op = LinearOperator::from_csr(a);
    CHECK(op.apply(CVector::Ones(3)).norm() == 0.0);
  }
  SUBCASE("hermitian and skew-symmetric") {
    const auto h = parse_matrix_market(
        "%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n"
        "1 1 1 0\n2 1 0 1\n");
    CHECK(h.to_dense()(0, 1) == Complex(0, -1));
    const auto s = parse_matrix_market(
        "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n"
        "2 1 4\n");
    CHECK(s.to_dense()(0, 1) == Complex(-4.0));
  }
  SUBCASE("errors carry line numbers") {
    try {
      parse_matrix_market(
          "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"
          "3 1 1\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
    CHECK_THROWS_AS(
        parse_matrix_market(
            "%%MatrixMarket matrix coordinate pattern general\n2 2 0\n"),
        ParseError);
    CHECK_THROWS_AS(
        parse_matrix_market(
            "%%MatrixMarket matrix array real general\n2 2\n"),
        ParseError);
    CHECK_THROWS_AS(
        parse_matrix_market(
            "%%MatrixMarket matrix coordinate real general\n2 3 0\n"),
        ParseError);
    CHECK_THROWS_AS(
        parse_matrix_market(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"),
        ParseError);
  }
  SUBCASE("round trip through a file") {
    std::mt19937_64 rng(21);
    const auto a = random_csr(30, 0.15, rng);
    const auto path =
        (std::filesystem::temp_directory_path() / "kexp_roundtrip.mtx")
            .string();
    save_matrix_market(a, path);
    const auto b = load_matrix_market(path);
    std::filesystem::remove(path);
    CHECK(b.row_offsets == a.row_offsets);
    CHECK(b.col_indices == a.col_indices);
    CHECK(b.values == a.values);
  }
  CHECK_THROWS_AS(load_matrix_market("/nonexistent/file.mtx"), InvalidArgument);
}
