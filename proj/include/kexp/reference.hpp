#pragma once

#include <memory>

#include "kexp/common.hpp"
#include "kexp/linops.hpp"

namespace kexp {

/// phi_p(t A) v for a dense matrix, from the exponential of the augmented
/// block matrix [[tA, v e_1^T], [0, J_p]] (J_p the upper shift).
/// Throws InvalidArgument for n > kDenseGuard.
CVector dense_reference_phi(const CMatrix& a, const CVector& v, double t,
                            int p);

/// phi_p(z) for a complex scalar.
Complex phi_scalar(Complex z, int p);

/// Truth oracle for phi_p(tA)v at arbitrary t. Three independent backends:
///   dense    - augmented dense exponential (dense_reference_phi)
///   spectral - eigendecomposition of a Hermitian generator, A = sigma B
///   kronecker_sum - A = T (x) I + I (x) T with exponentials of the N x N
///                   factor and Gauss-Legendre quadrature for p >= 1
class ReferencePhi {
 public:
  static ReferencePhi dense(const LinearOperator& op);
  static ReferencePhi spectral(const LinearOperator& hermitian_b,
                               Complex sigma);
  static ReferencePhi kronecker_sum(const RMatrix& factor);
  /// Picks the cheapest exact backend available for the operator.
  static ReferencePhi for_operator(const LinearOperator& op);

  CVector operator()(const CVector& v, double t, int p) const;
  /// ||phi_p(tA)v - basis * coeffs||_2, formed in the backend's working
  /// precision (long double for the spectral and Kronecker backends).
  double error_norm(const CVector& v, double t, int p, const CMatrix& basis,
                    const CVector& coeffs) const;
  Index n() const;

  struct Backend;

 private:
  explicit ReferencePhi(std::shared_ptr<const Backend> b)
      : backend_(std::move(b)) {}
  std::shared_ptr<const Backend> backend_;
};

}  // namespace kexp
