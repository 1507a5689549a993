#include "kexp/reference.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "kexp/quadrature.hpp"

namespace kexp {

CVector dense_reference_phi(const CMatrix& a, const CVector& v, double t,
                            int p) {
  const Index n = a.rows();
  if (a.cols() != n || v.size() != n)
    throw InvalidArgument("dense_reference_phi: dimension mismatch");
  if (n > kDenseGuard)
    throw InvalidArgument("dense_reference_phi: n exceeds dense guard");
  if (t < 0.0 || p < 0)
    throw InvalidArgument("dense_reference_phi: need t >= 0 and p >= 0");
  if (t == 0.0) return v / std::tgamma(p + 1.0);
  if (p == 0) {
    const CMatrix e = (t * a).exp();
    return e * v;
  }
  CMatrix k = CMatrix::Zero(n + p, n + p);
  k.topLeftCorner(n, n) = t * a;
  k.block(0, n, n, 1) = v;
  for (int j = 0; j + 1 < p; ++j) k(n + j, n + j + 1) = 1.0;
  const CMatrix e = k.exp();
  if (!e.allFinite()) throw NumericalError("dense_reference_phi: overflow");
  return e.block(0, n + p - 1, n, 1);
}

namespace {

// phi_p in any floating type; the truth backends evaluate it in long double
template <class R>
std::complex<R> phi_scalar_t(std::complex<R> z, int p) {
  using C = std::complex<R>;
  if (std::abs(z) < R(1)) {
    // sum z^k / (k+p)!
    R inv = R(1);
    for (int j = 2; j <= p; ++j) inv /= R(j);
    C term = inv, sum = inv;
    for (int k = 1; k < 80; ++k) {
      term *= z / static_cast<R>(k + p);
      sum += term;
      if (std::abs(term) <= R(1e-21) * std::abs(sum)) break;
    }
    return sum;
  }
  C phi = std::exp(z);
  R fact = R(1);  // 1/j!
  for (int j = 0; j < p; ++j) {
    phi = (phi - fact) / z;
    fact /= static_cast<R>(j + 1);
  }
  return phi;
}

}  // namespace

Complex phi_scalar(Complex z, int p) {
  if (p < 0) throw InvalidArgument("phi_scalar: p must be >= 0");
  return phi_scalar_t<double>(z, p);
}

struct ReferencePhi::Backend {
  virtual ~Backend() = default;
  virtual Index n() const = 0;
  virtual CVector apply(const CVector& v, double t, int p) const = 0;
  virtual double error_norm(const CVector& v, double t, int p,
                            const CMatrix& basis, const CVector& coeffs) const {
    return (apply(v, t, p) - basis * coeffs).norm();
  }
};

namespace {

class DenseBackend : public ReferencePhi::Backend {
 public:
  explicit DenseBackend(CMatrix a) : a_(std::move(a)) {}
  Index n() const override { return a_.rows(); }
  CVector apply(const CVector& v, double t, int p) const override {
    return dense_reference_phi(a_, v, t, p);
  }

 private:
  CMatrix a_;
};

using XReal = long double;
using XComplex = std::complex<XReal>;
using XRMatrix = Eigen::Matrix<XReal, Eigen::Dynamic, Eigen::Dynamic>;
using XCMatrix = Eigen::Matrix<XComplex, Eigen::Dynamic, Eigen::Dynamic>;
using XRVector = Eigen::Matrix<XReal, Eigen::Dynamic, 1>;
using XCVector = Eigen::Matrix<XComplex, Eigen::Dynamic, 1>;

double x_distance(const XCVector& exact, const CMatrix& basis,
                  const CVector& coeffs) {
  return static_cast<double>(
      (exact - basis.cast<XComplex>() * coeffs.cast<XComplex>()).norm());
}

// Backends for the larger test problems run in long double: their output is
// compared against errors near t * 1e-8 and double rounding in the truth
// itself can reach that level.
class SpectralBackend : public ReferencePhi::Backend {
 public:
  SpectralBackend(const CMatrix& b, Complex sigma)
      : sigma_(static_cast<XReal>(sigma.real()), static_cast<XReal>(sigma.imag())) {
    if (b.imag().cwiseAbs().maxCoeff() == 0.0) {
      Eigen::SelfAdjointEigenSolver<XRMatrix> es(b.real().cast<XReal>());
      if (es.info() != Eigen::Success)
        throw NumericalError("spectral reference: eigensolver failed");
      q_ = es.eigenvectors().cast<XComplex>();
      lambda_ = es.eigenvalues();
    } else {
      Eigen::SelfAdjointEigenSolver<XCMatrix> es(b.cast<XComplex>());
      if (es.info() != Eigen::Success)
        throw NumericalError("spectral reference: eigensolver failed");
      q_ = es.eigenvectors();
      lambda_ = es.eigenvalues();
    }
  }
  Index n() const override { return q_.rows(); }
  CVector apply(const CVector& v, double t, int p) const override {
    return apply_x(v, t, p).cast<Complex>();
  }
  double error_norm(const CVector& v, double t, int p, const CMatrix& basis,
                    const CVector& coeffs) const override {
    return x_distance(apply_x(v, t, p), basis, coeffs);
  }

 private:
  XCVector apply_x(const CVector& v, double t, int p) const {
    XCVector c = q_.adjoint() * v.cast<XComplex>();
    for (Index j = 0; j < c.size(); ++j)
      c[j] *= phi_scalar_t<XReal>(sigma_ * static_cast<XReal>(t) * lambda_[j], p);
    return q_ * c;
  }

  XCMatrix q_;
  XRVector lambda_;
  XComplex sigma_;
};

// A = T (x) I + I (x) T with vec(U) = v, U(i, j) = v[i + N j], so that
// A vec(U) = vec(T U + U T^T) and exp(tA) v = vec(E U E^T), E = exp(tT).
class KroneckerBackend : public ReferencePhi::Backend {
 public:
  explicit KroneckerBackend(const RMatrix& t) : t_(t.cast<XReal>()) {
    norm_a_ = 2.0 * t.cwiseAbs().colwise().sum().maxCoeff();
  }
  Index n() const override { return t_.rows() * t_.rows(); }

  CVector apply(const CVector& v, double t, int p) const override {
    return apply_x(v, t, p).cast<Complex>();
  }
  double error_norm(const CVector& v, double t, int p, const CMatrix& basis,
                    const CVector& coeffs) const override {
    return x_distance(apply_x(v, t, p), basis, coeffs);
  }

 private:
  XCVector apply_x(const CVector& v, double t, int p) const {
    const Index N = t_.rows();
    if (v.size() != N * N)
      throw InvalidArgument("kronecker reference: dimension mismatch");
    if (t < 0.0 || p < 0)
      throw InvalidArgument("kronecker reference: need t >= 0 and p >= 0");
    if (t == 0.0) return v.cast<XComplex>() / XComplex(std::tgamma(p + 1.0));
    const XCMatrix u =
        Eigen::Map<const CMatrix>(v.data(), N, N).cast<XComplex>();
    const XReal tx = static_cast<XReal>(t);
    // Short times: the series sum_k (tA)^k v/(k+p)! avoids the rounding of
    // exp(tT) ~ I, which is about 1e-17 and can exceed the Krylov error there.
    if (t * norm_a_ <= 0.5) {
      XCMatrix term = u, sum = XCMatrix::Zero(N, N);
      const XCMatrix tc = (tx * t_).cast<XComplex>();
      XReal fact = 1;
      for (int j = 2; j <= p; ++j) fact *= j;
      for (int k = 0; k < 60; ++k) {
        const XCMatrix add = term / XComplex(fact);
        sum += add;
        if (add.norm() <= 1e-24L * sum.norm()) break;
        term = tc * term + term * tc.transpose();
        fact *= static_cast<XReal>(k + p + 1);
      }
      return flatten(sum);
    }
    if (p == 0) return flatten(propagate(factor_exp(tx), u));

    // phi_p(tA)v = 1/(p-1)! int_0^1 exp((1-r)tA) r^{p-1} v dr, advanced
    // panel by panel: u(s + d) = exp(d tA) u(s) + panel integral.
    const Index panels = std::max<Index>(
        1, static_cast<Index>(std::ceil(t * norm_a_ / 2.0)));
    const XReal d = XReal(1) / static_cast<XReal>(panels);
    const GaussRule rule = gauss_legendre_unit();
    std::vector<XCMatrix> y(p, XCMatrix::Zero(N, N));
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const XReal x = rule.nodes[i];
      const XCMatrix ev = propagate(factor_exp(d * (1 - x) * tx), u);
      XReal xk = 1;
      for (int k = 0; k < p; ++k) {
        y[k] += XComplex(d * static_cast<XReal>(rule.weights[i]) * xk) * ev;
        xk *= x;
      }
    }
    const XRMatrix step = factor_exp(d * tx);
    XReal inv_fact = 1;
    for (int j = 2; j < p; ++j) inv_fact /= j;
    XCMatrix acc = XCMatrix::Zero(N, N);
    for (Index panel = 0; panel < panels; ++panel) {
      const XReal s = d * static_cast<XReal>(panel);
      acc = propagate(step, acc);
      // (s + d x)^{p-1} expanded binomially in x
      for (int k = 0; k < p; ++k) {
        const XReal c = binomial(p - 1, k) * std::pow(s, XReal(p - 1 - k)) *
                        std::pow(d, XReal(k)) * inv_fact;
        if (c != 0) acc += XComplex(c) * y[k];
      }
    }
    return flatten(acc);
  }

  XRMatrix factor_exp(XReal tau) const {
    const XRMatrix x = tau * t_;
    XRMatrix e = x.exp();
    if (!e.allFinite()) throw NumericalError("kronecker reference: overflow");
    return e;
  }
  static XCMatrix propagate(const XRMatrix& e, const XCMatrix& u) {
    const XCMatrix ec = e.cast<XComplex>();
    return ec * u * ec.transpose();
  }
  static XCVector flatten(const XCMatrix& u) {
    return Eigen::Map<const XCVector>(u.data(), u.size());
  }
  static XReal binomial(int n, int k) {
    XReal r = 1;
    for (int i = 1; i <= k; ++i)
      r = r * static_cast<XReal>(n - k + i) / static_cast<XReal>(i);
    return r;
  }

  XRMatrix t_;
  double norm_a_ = 0.0;
};

}  // namespace

ReferencePhi ReferencePhi::dense(const LinearOperator& op) {
  return ReferencePhi(std::make_shared<DenseBackend>(op.to_dense()));
}

ReferencePhi ReferencePhi::spectral(const LinearOperator& hermitian_b,
                                    Complex sigma) {
  if (hermitian_b.structure() != Structure::hermitian)
    throw InvalidArgument("spectral reference needs a Hermitian generator");
  return ReferencePhi(
      std::make_shared<SpectralBackend>(hermitian_b.to_dense(), sigma));
}

ReferencePhi ReferencePhi::kronecker_sum(const RMatrix& factor) {
  if (factor.rows() != factor.cols() || factor.rows() == 0)
    throw InvalidArgument("kronecker reference: factor must be square");
  return ReferencePhi(std::make_shared<KroneckerBackend>(factor));
}

ReferencePhi ReferencePhi::for_operator(const LinearOperator& op) {
  if (const RMatrix* f = op.kronecker_factor()) return kronecker_sum(*f);
  if (const LinearOperator* b = op.hermitian_generator())
    return spectral(*b, op.generator_scale());
  if (op.structure() == Structure::hermitian) return spectral(op, 1.0);
  return dense(op);
}

CVector ReferencePhi::operator()(const CVector& v, double t, int p) const {
  if (v.size() != n()) throw InvalidArgument("reference: dimension mismatch");
  return backend_->apply(v, t, p);
}

double ReferencePhi::error_norm(const CVector& v, double t, int p,
                               const CMatrix& basis,
                               const CVector& coeffs) const {
  if (v.size() != n() || basis.rows() != n() || basis.cols() != coeffs.size())
    throw InvalidArgument("reference: dimension mismatch");
  return backend_->error_norm(v, t, p, basis, coeffs);
}

Index ReferencePhi::n() const { return backend_->n(); }

}  // namespace kexp
