#include "kexp/linops.hpp"

#include <algorithm>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

namespace kexp {

std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::hermitian:
      return "hermitian";
    case Structure::skew_hermitian:
      return "skew_hermitian";
    case Structure::general:
      return "general";
  }
  return "general";
}

// ---------------------------------------------------------------------------
// SparseMatrixCSR

void SparseMatrixCSR::validate() const {
  if (n < 0) throw InvalidArgument("CSR: negative dimension");
  if (static_cast<Index>(row_offsets.size()) != n + 1)
    throw InvalidArgument("CSR: row_offsets must have n+1 entries");
  if (row_offsets.front() != 0)
    throw InvalidArgument("CSR: row_offsets must start at 0");
  for (Index i = 0; i < n; ++i)
    if (row_offsets[i + 1] < row_offsets[i])
      throw InvalidArgument("CSR: row_offsets not monotone at row " +
                            std::to_string(i));
  if (row_offsets.back() != nnz())
    throw InvalidArgument("CSR: final offset differs from nnz");
  if (col_indices.size() != values.size())
    throw InvalidArgument("CSR: column/value arrays differ in length");
  for (Index c : col_indices)
    if (c < 0 || c >= n)
      throw InvalidArgument("CSR: column index out of range");
}

void SparseMatrixCSR::multiply(const CVector& x, CVector& y) const {
  y.resize(n);
  for (Index i = 0; i < n; ++i) {
    Complex acc{0.0, 0.0};
    for (Index k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
      acc += values[k] * x[col_indices[k]];
    y[i] = acc;
  }
}

void SparseMatrixCSR::multiply_adjoint(const CVector& x, CVector& y) const {
  y.setZero(n);
  for (Index i = 0; i < n; ++i)
    for (Index k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
      y[col_indices[k]] += std::conj(values[k]) * x[i];
}

CMatrix SparseMatrixCSR::to_dense() const {
  if (n > kDenseGuard) throw InvalidArgument("CSR: too large to densify");
  CMatrix d = CMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
      d(i, col_indices[k]) += values[k];
  return d;
}

SparseMatrixCSR SparseMatrixCSR::from_entries(Index n,
                                              std::vector<Entry> entries) {
  if (n < 0) throw InvalidArgument("CSR: negative dimension");
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrixCSR m;
  m.n = n;
  m.row_offsets.assign(n + 1, 0);
  Index prev_row = -1, prev_col = -1;
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n)
      throw InvalidArgument("CSR: entry index out of range");
    if (e.row == prev_row && e.col == prev_col) {
      m.values.back() += e.value;
      continue;
    }
    m.col_indices.push_back(e.col);
    m.values.push_back(e.value);
    ++m.row_offsets[e.row + 1];
    prev_row = e.row;
    prev_col = e.col;
  }
  for (Index i = 0; i < n; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
  return m;
}

// ---------------------------------------------------------------------------
// LinearOperator

namespace {

CVector random_unit_vector(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  CVector x(n);
  for (Index i = 0; i < n; ++i) x[i] = Complex(dist(rng), dist(rng));
  return x / x.norm();
}

double relative_asymmetry(const CMatrix& a, Complex sign) {
  const double scale = std::max(a.norm(), 1e-300);
  return (a - sign * a.adjoint()).norm() / scale;
}

Structure detect_dense_structure(const CMatrix& a) {
  if (a.size() == 0) return Structure::hermitian;
  if (relative_asymmetry(a, 1.0) <= 1e-14) return Structure::hermitian;
  if (relative_asymmetry(a, -1.0) <= 1e-14) return Structure::skew_hermitian;
  return Structure::general;
}

Structure detect_csr_structure(const SparseMatrixCSR& a) {
  // Compare A with its adjoint entrywise through a transposed copy.
  std::vector<SparseMatrixCSR::Entry> adj;
  adj.reserve(a.values.size());
  for (Index i = 0; i < a.n; ++i)
    for (Index k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      adj.push_back({a.col_indices[k], i, std::conj(a.values[k])});
  const auto at = SparseMatrixCSR::from_entries(a.n, std::move(adj));
  const auto a_sorted = SparseMatrixCSR::from_entries(a.n, [&] {
    std::vector<SparseMatrixCSR::Entry> e;
    for (Index i = 0; i < a.n; ++i)
      for (Index k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
        e.push_back({i, a.col_indices[k], a.values[k]});
    return e;
  }());
  double scale = 0.0;
  for (const auto& v : a.values) scale += std::norm(v);
  scale = std::sqrt(scale);
  if (scale == 0.0) return Structure::hermitian;
  auto mismatch = [&](double sign) {
    // sum over the union pattern of |a_ij - sign * conj(a_ji)|^2
    double acc = 0.0;
    for (Index i = 0; i < a.n; ++i) {
      Index p = a_sorted.row_offsets[i], q = at.row_offsets[i];
      const Index pe = a_sorted.row_offsets[i + 1], qe = at.row_offsets[i + 1];
      while (p < pe || q < qe) {
        if (q >= qe || (p < pe && a_sorted.col_indices[p] < at.col_indices[q])) {
          acc += std::norm(a_sorted.values[p++]);
        } else if (p >= pe || at.col_indices[q] < a_sorted.col_indices[p]) {
          acc += std::norm(at.values[q++]);
        } else {
          acc += std::norm(a_sorted.values[p++] - sign * at.values[q++]);
        }
      }
    }
    return std::sqrt(acc) / scale;
  };
  if (mismatch(1.0) <= 1e-14) return Structure::hermitian;
  if (mismatch(-1.0) <= 1e-14) return Structure::skew_hermitian;
  return Structure::general;
}

// Largest eigenvalue of a Hermitian map by Lanczos with full
// reorthogonalization; Ritz values approach the extremes from inside.
double lanczos_max_eigenvalue(const LinearOperator::ApplyFn& apply, Index n,
                              Index steps, std::uint64_t seed) {
  steps = std::min(steps, n);
  CMatrix v(n, steps + 1);
  RVector alpha = RVector::Zero(steps), beta = RVector::Zero(steps);
  v.col(0) = random_unit_vector(n, seed);
  Index k = 0;
  CVector w(n);
  for (; k < steps; ++k) {
    apply(v.col(k), w);
    alpha[k] = v.col(k).dot(w).real();
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j <= k; ++j) w -= v.col(j).dot(w) * v.col(j);
    beta[k] = w.norm();
    if (beta[k] <= 1e-13 * (std::abs(alpha[k]) + 1e-300) || k + 1 == steps) {
      ++k;
      break;
    }
    v.col(k + 1) = w / beta[k];
  }
  RMatrix t = RMatrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> es(t, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

constexpr std::uint64_t kEstimateSeed = 0x5eed0001ULL;

}  // namespace

LinearOperator::LinearOperator(Index n, ApplyFn apply, ApplyFn apply_adjoint,
                               Structure structure)
    : state_(std::make_shared<State>()) {
  if (n <= 0) throw InvalidArgument("LinearOperator: dimension must be > 0");
  state_->n = n;
  state_->apply = std::move(apply);
  state_->apply_adjoint = std::move(apply_adjoint);
  state_->structure = structure;
  estimate_spectrum();
}

void LinearOperator::estimate_spectrum() {
  const Index n = state_->n;
  // 20 power iterations on A^*A
  CVector x = random_unit_vector(n, kEstimateSeed), y(n), z(n);
  double est = 0.0;
  for (int it = 0; it < 20; ++it) {
    state_->apply(x, y);
    state_->apply_adjoint(y, z);
    const double nz = z.norm();
    est = std::sqrt(std::max(x.dot(z).real(), 0.0));
    if (nz == 0.0) break;
    x = z / nz;
  }
  state_->norm2 = est;

  switch (state_->structure) {
    case Structure::skew_hermitian:
      state_->mu2 = 0.0;
      break;
    case Structure::hermitian:
      state_->mu2 = lanczos_max_eigenvalue(state_->apply, n, 40, kEstimateSeed);
      break;
    case Structure::general: {
      auto s = state_;
      ApplyFn sym = [s](const CVector& in, CVector& out) {
        CVector t(in.size());
        s->apply(in, out);
        s->apply_adjoint(in, t);
        out = 0.5 * (out + t);
      };
      state_->mu2 = lanczos_max_eigenvalue(sym, n, 40, kEstimateSeed);
      break;
    }
  }
}

LinearOperator LinearOperator::from_csr(SparseMatrixCSR a,
                                        Structure structure) {
  a.validate();
  auto shared = std::make_shared<const SparseMatrixCSR>(std::move(a));
  return LinearOperator(
      shared->n,
      [shared](const CVector& x, CVector& y) { shared->multiply(x, y); },
      [shared](const CVector& x, CVector& y) {
        shared->multiply_adjoint(x, y);
      },
      structure);
}

LinearOperator LinearOperator::from_csr(SparseMatrixCSR a) {
  a.validate();
  const Structure s = detect_csr_structure(a);
  return from_csr(std::move(a), s);
}

LinearOperator LinearOperator::from_dense(CMatrix a, Structure structure) {
  if (a.rows() != a.cols()) throw InvalidArgument("dense operator not square");
  auto shared = std::make_shared<const CMatrix>(std::move(a));
  return LinearOperator(
      shared->rows(),
      [shared](const CVector& x, CVector& y) { y.noalias() = *shared * x; },
      [shared](const CVector& x, CVector& y) {
        y.noalias() = shared->adjoint() * x;
      },
      structure);
}

LinearOperator LinearOperator::from_dense(CMatrix a) {
  if (a.rows() != a.cols()) throw InvalidArgument("dense operator not square");
  const Structure s = detect_dense_structure(a);
  return from_dense(std::move(a), s);
}

LinearOperator LinearOperator::skew_from_hermitian(const LinearOperator& b,
                                                   Complex sigma) {
  if (b.structure() != Structure::hermitian)
    throw InvalidArgument("skew_from_hermitian: generator is not Hermitian");
  if (std::abs(sigma.real()) > 1e-15 || std::abs(std::abs(sigma) - 1.0) > 1e-15)
    throw InvalidArgument("skew_from_hermitian: sigma must be +i or -i");
  auto gen = std::make_shared<const LinearOperator>(b);
  auto state = std::make_shared<State>();
  state->n = b.n();
  state->apply = [gen, sigma](const CVector& x, CVector& y) {
    gen->state_->apply(x, y);
    y *= sigma;
  };
  state->apply_adjoint = [gen, sigma](const CVector& x, CVector& y) {
    gen->state_->apply(x, y);
    y *= std::conj(sigma);
  };
  state->structure = Structure::skew_hermitian;
  state->norm2 = b.norm2_estimate();
  state->mu2 = 0.0;
  state->generator = gen;
  state->sigma = sigma;
  return LinearOperator(state);
}

LinearOperator LinearOperator::with_kronecker_factor(RMatrix factor) const {
  if (factor.rows() * factor.rows() != n())
    throw InvalidArgument("Kronecker factor dimension mismatch");
  auto state = std::make_shared<State>(*state_);
  state->kronecker_factor = std::make_shared<const RMatrix>(std::move(factor));
  return LinearOperator(state);
}

CVector LinearOperator::apply(const CVector& x) const {
  if (x.size() != n())
    throw InvalidArgument("matvec: dimension mismatch (" +
                          std::to_string(x.size()) + " vs " +
                          std::to_string(n()) + ")");
  CVector y(n());
  state_->apply(x, y);
  return y;
}

CVector LinearOperator::apply_adjoint(const CVector& x) const {
  if (x.size() != n()) throw InvalidArgument("matvec: dimension mismatch");
  CVector y(n());
  state_->apply_adjoint(x, y);
  return y;
}

CMatrix LinearOperator::to_dense() const {
  if (n() > kDenseGuard)
    throw InvalidArgument("to_dense: dimension exceeds dense guard");
  CMatrix d(n(), n());
  CVector e = CVector::Zero(n()), y(n());
  for (Index j = 0; j < n(); ++j) {
    e[j] = 1.0;
    state_->apply(e, y);
    d.col(j) = y;
    e[j] = 0.0;
  }
  return d;
}

CVector matvec(const LinearOperator& op, const CVector& x) {
  return op.apply(x);
}

// ---------------------------------------------------------------------------
// Generators

LinearOperator build_laplacian_1d(Index n) {
  if (n < 2) throw InvalidArgument("build_laplacian_1d: n must be >= 2");
  std::vector<SparseMatrixCSR::Entry> e;
  e.reserve(3 * n);
  for (Index i = 0; i < n; ++i) {
    if (i > 0) e.push_back({i, i - 1, 1.0});
    e.push_back({i, i, -2.0});
    if (i + 1 < n) e.push_back({i, i + 1, 1.0});
  }
  return LinearOperator::from_csr(SparseMatrixCSR::from_entries(n, e),
                                  Structure::hermitian);
}

RMatrix convection_diffusion_factor(Index N, double nu) {
  if (N < 2) throw InvalidArgument("convection-diffusion: N must be >= 2");
  const double h = 1.0 / static_cast<double>(N + 1);
  const double diff = 1.0 / (h * h);
  const double conv = nu / (2.0 * h);
  RMatrix t = RMatrix::Zero(N, N);
  for (Index i = 0; i < N; ++i) {
    t(i, i) = -2.0 * diff;
    if (i + 1 < N) t(i, i + 1) = diff + conv;
    if (i > 0) t(i, i - 1) = diff - conv;
  }
  return t;
}

LinearOperator build_convection_diffusion_2d(Index N, double nu) {
  RMatrix t = convection_diffusion_factor(N, nu);
  const Index n = N * N;
  std::vector<SparseMatrixCSR::Entry> e;
  e.reserve(5 * n);
  for (Index j = 0; j < N; ++j) {
    for (Index i = 0; i < N; ++i) {
      const Index k = i + N * j;
      e.push_back({k, k, 2.0 * t(i, i)});
      if (i > 0) e.push_back({k, k - 1, t(i, i - 1)});
      if (i + 1 < N) e.push_back({k, k + 1, t(i, i + 1)});
      if (j > 0) e.push_back({k, k - N, t(j, j - 1)});
      if (j + 1 < N) e.push_back({k, k + N, t(j, j + 1)});
    }
  }
  const Structure s = nu == 0.0 ? Structure::hermitian : Structure::general;
  return LinearOperator::from_csr(SparseMatrixCSR::from_entries(n, e), s)
      .with_kronecker_factor(std::move(t));
}

SchrodingerProblem build_schrodinger_double_well(Index n) {
  if (n < 4) throw InvalidArgument("build_schrodinger_double_well: n >= 4");
  const double length = 20.0;
  const double h = length / static_cast<double>(n);
  RVector x(n);
  for (Index j = 0; j < n; ++j) x[j] = -10.0 + h * static_cast<double>(j);

  std::vector<SparseMatrixCSR::Entry> e;
  e.reserve(3 * n);
  const double lap = 1.0 / (h * h);
  for (Index j = 0; j < n; ++j) {
    const double v = std::pow(x[j], 4) - 15.0 * x[j] * x[j];
    e.push_back({j, j, -2.0 * lap + v});
    e.push_back({j, (j + 1) % n, lap});
    e.push_back({j, (j + n - 1) % n, lap});
  }
  auto b = LinearOperator::from_csr(SparseMatrixCSR::from_entries(n, e),
                                    Structure::hermitian);

  CVector psi(n);
  const double norm_const = std::pow(0.2 * std::numbers::pi, -0.25);
  for (Index j = 0; j < n; ++j)
    psi[j] = norm_const * std::exp(-(x[j] + 2.5) * (x[j] + 2.5) / 0.4);
  psi /= psi.norm();

  auto a = LinearOperator::skew_from_hermitian(b, -kI);
  return SchrodingerProblem{b, a, psi, x};
}

}  // namespace kexp
