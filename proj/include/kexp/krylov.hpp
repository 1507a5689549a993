#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "kexp/common.hpp"
#include "kexp/linops.hpp"

namespace kexp {

enum class OrthScheme { mgs, mgs_reorth, full_reorth };

std::string_view to_string(OrthScheme s);
/// Accepts mgs, mgs+, mgs_reorth, full, full_reorth.
OrthScheme parse_orth_scheme(std::string_view name);

/// Optional early stop: halt once beta * h_{k+1,k} / (p+1)! <= tol.
struct LuckyStop {
  double tol = 0.0;
  int p = 0;
};

struct OrthPolicy {
  OrthScheme scheme = OrthScheme::mgs_reorth;
  /// Breakdown when h_{k+1,k} <= breakdown_tol * norm2_estimate.
  double breakdown_tol = 1e-14;
  std::optional<LuckyStop> lucky;

  void validate() const;
};

/// A V_m = V_m H_m + h_{m+1,m} sigma v_{m+1} e_m^*.
///
/// For the Arnoldi process sigma = 1. A skew-Hermitian operator sigma*B is
/// reduced with Lanczos on B; then `tridiagonal` holds the real matrix T,
/// H = sigma*T is the effective Hessenberg matrix of A, and h_next is the
/// positive Lanczos coefficient.
struct KrylovDecomposition {
  CMatrix V;            // n x (m+1); last column is zero if has_next is false
  CMatrix H;            // m x m
  double beta = 0.0;
  double h_next = 0.0;
  Complex sigma{1.0, 0.0};
  bool has_next = false;
  double log_gamma = 0.0;  // sum of log |(H)_{j+1,j}|
  Complex gamma_phase{1.0, 0.0};
  Index m = 0;
  bool breakdown = false;
  bool lucky_stop = false;
  Index matvecs = 0;
  std::optional<RMatrix> tridiagonal;

  Index n() const { return V.rows(); }
  double log_beta() const { return std::log(beta); }
  /// Leading sub-decomposition of dimension k <= m (exact by the prefix
  /// property of the Arnoldi and Lanczos recurrences).
  KrylovDecomposition prefix(Index k) const;
  /// Eigenvalues of H; exactly sigma * (real eigenvalues of T) when the
  /// tridiagonal matrix is present.
  std::vector<Complex> ritz() const;
  /// beta V_m y for a coefficient vector y of length m.
  CVector lift(const CVector& y) const;
  /// Krylov propagator beta V_m phi_p(tH) e_1 for the starting vector v,
  /// evaluated as v/p! + beta V_m tH phi_{p+1}(tH) e_1. Both are equal in
  /// exact arithmetic; this form keeps rounding proportional to t ||H||,
  /// which matters when t ||A|| << 1.
  CVector propagator(const CVector& v, int p, double t) const;
};

KrylovDecomposition arnoldi(const LinearOperator& op, const CVector& v,
                            Index m, const OrthPolicy& policy = {});

/// Requires op.structure() == hermitian.
KrylovDecomposition lanczos(const LinearOperator& op, const CVector& v,
                            Index m, const OrthPolicy& policy = {});

/// Lanczos for Hermitian operators and for sigma*B with known generator B,
/// Arnoldi otherwise.
KrylovDecomposition krylov(const LinearOperator& op, const CVector& v,
                           Index m, const OrthPolicy& policy = {});

/// || A V_m - V_m H_m - h sigma v_{m+1} e_m^* ||_2
double decomposition_residual(const KrylovDecomposition& dec,
                              const LinearOperator& op);

/// || V^* V - I ||_2 over the stored basis vectors.
double orthogonality_level(const KrylovDecomposition& dec);

}  // namespace kexp
