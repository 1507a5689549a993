#pragma once

#include <vector>

#include "kexp/common.hpp"

namespace kexp {

/// Matrix exponential by scaling and squaring with a Taylor kernel whose
/// truncation is decided entrywise, so small entries (the far corners of
/// exponentials of Hessenberg matrices) keep their relative accuracy.
/// Throws NumericalError on non-finite input or overflow, InvalidArgument
/// above kSmallDenseGuard.
CMatrix expm(const CMatrix& m);

inline constexpr Index kSmallDenseGuard = 4000;

/// First column of exp(X), stored as col_j = mantissa_j * exp(j * log_ratio)
/// (j zero-based). For upper Hessenberg X the ratio is picked from the
/// subdiagonal so the entries stay representable when exp(X)e_1 decays
/// like t^j / j!.
struct ScaledColumn {
  CVector mantissa;
  double log_ratio = 0.0;

  Index size() const { return mantissa.size(); }
  ScaledComplex entry(Index j) const {
    return {mantissa[j], static_cast<double>(j) * log_ratio};
  }
  CVector values() const;
};

ScaledColumn expm_first_column(const CMatrix& x);

/// [[H, 0], [e_1 e_m^*, J]] with J the p x p lower shift.
struct AugmentedHessenberg {
  CMatrix base;
  int p = 0;
  CMatrix full;

  static AugmentedHessenberg build(const CMatrix& h, int p);
};

/// y_{p,m}(t) = beta phi_p(t H) e_1.
CVector phi_action(const CMatrix& h, int p, double t, double beta);

/// beta e_{m+p}^* exp(t Htilde_{p}) e_1 = t^p (y_{p,m}(t))_m.
Complex corner_phi(const CMatrix& h, int p, double t, double beta);
ScaledComplex corner_phi_scaled(const CMatrix& h, int p, double t,
                                double beta);

/// Interpolation nodes lambda_1..lambda_m followed by `padding` zeros.
struct NodeSet {
  std::vector<Complex> nodes;
  int padding = 0;

  NodeSet() = default;
  NodeSet(std::vector<Complex> n, int pad = 0);

  Index size() const { return static_cast<Index>(nodes.size()) + padding; }
  std::vector<Complex> padded() const;
  NodeSet real_parts() const;
  NodeSet with_padding(int pad) const { return NodeSet(nodes, pad); }
};

/// exp_t[nodes, 0_p] as the (k,1) corner of exp(t Theta), Theta lower
/// bidiagonal with the padded nodes on the diagonal and ones below.
Complex divided_differences_exp(const NodeSet& ns, double t);
ScaledComplex divided_differences_exp_scaled(const NodeSet& ns, double t);

/// Eigenvalues of H (unordered).
std::vector<Complex> ritz_values(const CMatrix& h);
/// Eigenvalues of a real symmetric tridiagonal matrix, ascending.
std::vector<double> symmetric_eigenvalues(const RMatrix& t);

}  // namespace kexp
