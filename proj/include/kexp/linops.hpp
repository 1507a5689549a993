#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "kexp/common.hpp"

namespace kexp {

enum class Structure { hermitian, skew_hermitian, general };

std::string_view to_string(Structure s);

/// Compressed sparse row storage for a square complex matrix.
struct SparseMatrixCSR {
  Index n = 0;
  std::vector<Index> row_offsets{0};
  std::vector<Index> col_indices;
  std::vector<Complex> values;

  Index nnz() const { return static_cast<Index>(values.size()); }

  /// Throws InvalidArgument unless offsets are monotone, columns lie in
  /// [0, n) and the final offset equals nnz.
  void validate() const;

  /// y = A x
  void multiply(const CVector& x, CVector& y) const;
  /// y = A^* x
  void multiply_adjoint(const CVector& x, CVector& y) const;

  CMatrix to_dense() const;

  struct Entry {
    Index row;
    Index col;
    Complex value;
  };
  /// Builds CSR from unordered entries; duplicate (row, col) pairs are summed.
  static SparseMatrixCSR from_entries(Index n, std::vector<Entry> entries);
};

/// Immutable complex linear map of dimension n.
///
/// Carries a structure flag and two spectral estimates computed once at
/// construction: norm2_estimate (power iteration on A^*A) and mu2_estimate,
/// the logarithmic 2-norm max spec((A+A^*)/2). A skew-Hermitian operator
/// built through skew_from_hermitian also remembers its Hermitian generator
/// B and the unit factor sigma with A = sigma * B, so Krylov methods can run
/// the three-term recurrence on B.
class LinearOperator {
 public:
  using ApplyFn = std::function<void(const CVector& x, CVector& y)>;

  LinearOperator(Index n, ApplyFn apply, ApplyFn apply_adjoint,
                 Structure structure);

  static LinearOperator from_csr(SparseMatrixCSR a, Structure structure);
  /// Detects the structure flag numerically.
  static LinearOperator from_csr(SparseMatrixCSR a);
  static LinearOperator from_dense(CMatrix a, Structure structure);
  static LinearOperator from_dense(CMatrix a);
  /// A = sigma * B for Hermitian B and sigma = +-i.
  static LinearOperator skew_from_hermitian(const LinearOperator& b,
                                            Complex sigma = -kI);

  Index n() const { return state_->n; }
  Structure structure() const { return state_->structure; }
  double norm2_estimate() const { return state_->norm2; }
  double mu2_estimate() const { return state_->mu2; }

  CVector apply(const CVector& x) const;
  CVector apply_adjoint(const CVector& x) const;

  /// Hermitian generator B when this operator is sigma*B, else nullptr.
  const LinearOperator* hermitian_generator() const {
    return state_->generator.get();
  }
  Complex generator_scale() const { return state_->sigma; }

  /// Factor T when the operator is the Kronecker sum T (x) I + I (x) T.
  const RMatrix* kronecker_factor() const {
    return state_->kronecker_factor.get();
  }
  LinearOperator with_kronecker_factor(RMatrix factor) const;

  /// Dense matrix obtained by applying the operator to unit vectors.
  CMatrix to_dense() const;

 private:
  struct State {
    Index n = 0;
    ApplyFn apply;
    ApplyFn apply_adjoint;
    Structure structure = Structure::general;
    double norm2 = 0.0;
    double mu2 = 0.0;
    std::shared_ptr<const LinearOperator> generator;
    Complex sigma{1.0, 0.0};
    std::shared_ptr<const RMatrix> kronecker_factor;
  };
  explicit LinearOperator(std::shared_ptr<State> s) : state_(std::move(s)) {}
  void estimate_spectrum();

  std::shared_ptr<State> state_;
};

CVector matvec(const LinearOperator& op, const CVector& x);

/// Maximum dimension for which dense work (densify, dense oracle) is allowed.
inline constexpr Index kDenseGuard = 4000;

// ---------------------------------------------------------------------------
// Test-problem generators

/// tridiag(1, -2, 1) of dimension n (n >= 2).
LinearOperator build_laplacian_1d(Index n);

/// One-dimensional factor T (N x N) of the 2D convection-diffusion operator,
/// which equals T (x) I + I (x) T on the N^2 interior grid.
RMatrix convection_diffusion_factor(Index N, double nu);

/// Central-difference discretization of Laplace + nu (d/dx1 + d/dx2) on the
/// unit square with homogeneous Dirichlet data and N interior points per
/// direction (h = 1/(N+1)). Grid index k = i + N j.
LinearOperator build_convection_diffusion_2d(Index N, double nu);

struct SchrodingerProblem {
  LinearOperator hamiltonian;  // B = Laplace + V, Hermitian
  LinearOperator propagator;   // A = -i B, skew-Hermitian
  CVector initial_state;       // normalized Gaussian wavepacket
  RVector grid;                // mesh nodes x_j
};

/// Double-well Hamiltonian with V(x) = x^4 - 15 x^2 on [-10, 10), periodic
/// 3-point Laplacian with mesh width 20/n, potential sampled at the nodes.
SchrodingerProblem build_schrodinger_double_well(Index n);

// ---------------------------------------------------------------------------
// Matrix Market

SparseMatrixCSR load_matrix_market(const std::string& path);
SparseMatrixCSR parse_matrix_market(std::string_view text);
/// Writes a general complex coordinate file that load_matrix_market
/// reads back exactly.
void save_matrix_market(const SparseMatrixCSR& a, const std::string& path);

}  // namespace kexp
