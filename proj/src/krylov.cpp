#include "kexp/krylov.hpp"

#include <algorithm>

#include <Eigen/Eigenvalues>

#include "kexp/small_dense.hpp"
#include "kexp/stepper.hpp"

namespace kexp {

std::string_view to_string(OrthScheme s) {
  switch (s) {
    case OrthScheme::mgs:
      return "mgs";
    case OrthScheme::mgs_reorth:
      return "mgs+";
    case OrthScheme::full_reorth:
      return "full";
  }
  return "?";
}

OrthScheme parse_orth_scheme(std::string_view name) {
  if (name == "mgs") return OrthScheme::mgs;
  if (name == "mgs+" || name == "mgs_reorth") return OrthScheme::mgs_reorth;
  if (name == "full" || name == "full_reorth") return OrthScheme::full_reorth;
  throw InvalidArgument("unknown orthogonalization scheme '" +
                        std::string(name) + "'");
}

void OrthPolicy::validate() const {
  if (!(breakdown_tol > 0.0))
    throw InvalidArgument("OrthPolicy: breakdown_tol must be > 0");
  if (lucky && (!(lucky->tol > 0.0) || lucky->p < 0))
    throw InvalidArgument("OrthPolicy: lucky stop needs tol > 0, p >= 0");
}

namespace {

// Projects w against the first k columns of V, accumulating coefficients.
void project(const CMatrix& v, Index k, CVector& w, CVector& coeff) {
  for (Index i = 0; i < k; ++i) {
    const Complex c = v.col(i).dot(w);
    coeff[i] += c;
    w -= c * v.col(i);
  }
}

void check_inputs(const LinearOperator& op, const CVector& v, Index m,
                  const OrthPolicy& policy) {
  policy.validate();
  if (v.size() != op.n())
    throw InvalidArgument("Krylov: starting vector has wrong dimension");
  if (m < 1) throw InvalidArgument("Krylov: m must be >= 1");
  if (m > op.n()) throw InvalidArgument("Krylov: m exceeds dimension n");
  if (!v.allFinite()) throw InvalidArgument("Krylov: non-finite start vector");
  if (v.norm() == 0.0) throw InvalidArgument("Krylov: zero starting vector");
}

bool should_stop_lucky(const OrthPolicy& policy, double beta, double h) {
  return policy.lucky &&
         lucky_breakdown_check(beta, h, policy.lucky->p, policy.lucky->tol);
}

// Shrinks the working arrays once the final dimension is known.
void finalize(KrylovDecomposition& d, Index k, double h, const CVector& w) {
  d.m = k;
  d.H.conservativeResize(k, k);
  d.V.conservativeResize(Eigen::NoChange, k + 1);
  d.h_next = h;
  if (h > 0.0 && !d.breakdown) {
    d.V.col(k) = w / h;
    d.has_next = true;
  } else {
    d.V.col(k).setZero();
    d.has_next = false;
  }
  d.log_gamma = 0.0;
  d.gamma_phase = 1.0;
  for (Index j = 0; j + 1 < k; ++j) {
    const Complex s = d.H(j + 1, j);
    d.log_gamma += std::log(std::abs(s));
    d.gamma_phase *= s / std::abs(s);
  }
}

KrylovDecomposition run_lanczos(const LinearOperator::ApplyFn& apply_b,
                                Index n, double norm_b, const CVector& v,
                                Index m, const OrthPolicy& policy,
                                Complex sigma) {
  KrylovDecomposition d;
  d.sigma = sigma;
  d.beta = v.norm();
  d.V = CMatrix::Zero(n, m + 1);
  d.V.col(0) = v / d.beta;
  RMatrix t = RMatrix::Zero(m, m);
  CVector w(n), coeff(m);
  double h = 0.0;
  Index k = 0;
  for (; k < m; ++k) {
    apply_b(d.V.col(k), w);
    ++d.matvecs;
    const double alpha = d.V.col(k).dot(w).real();
    w -= alpha * d.V.col(k);
    if (k > 0) w -= t(k, k - 1) * d.V.col(k - 1);
    t(k, k) = alpha;
    if (policy.scheme != OrthScheme::mgs) {
      const double before = w.norm();
      coeff.setZero();
      project(d.V, k + 1, w, coeff);
      if (policy.scheme == OrthScheme::full_reorth || w.norm() < 0.7 * before)
        project(d.V, k + 1, w, coeff);
      t(k, k) += coeff[k].real();
    }
    h = w.norm();
    if (h <= policy.breakdown_tol * norm_b) {
      d.breakdown = true;
      ++k;
      break;
    }
    if (k + 1 == m) {
      ++k;
      break;
    }
    if (should_stop_lucky(policy, d.beta, h)) {
      d.lucky_stop = true;
      ++k;
      break;
    }
    t(k + 1, k) = h;
    t(k, k + 1) = h;
    d.V.col(k + 1) = w / h;
  }
  t.conservativeResize(k, k);
  d.H = sigma * t.cast<Complex>();
  d.tridiagonal = t;
  finalize(d, k, h, w);
  return d;
}

}  // namespace

KrylovDecomposition arnoldi(const LinearOperator& op, const CVector& v,
                            Index m, const OrthPolicy& policy) {
  check_inputs(op, v, m, policy);
  const Index n = op.n();
  KrylovDecomposition d;
  d.beta = v.norm();
  d.V = CMatrix::Zero(n, m + 1);
  d.V.col(0) = v / d.beta;
  d.H = CMatrix::Zero(m, m);
  CVector w(n), coeff(m);
  double h = 0.0;
  Index k = 0;
  for (; k < m; ++k) {
    w = op.apply(d.V.col(k));
    ++d.matvecs;
    coeff.setZero();
    const double before = w.norm();
    project(d.V, k + 1, w, coeff);
    if (policy.scheme == OrthScheme::full_reorth ||
        (policy.scheme == OrthScheme::mgs_reorth && w.norm() < 0.7 * before))
      project(d.V, k + 1, w, coeff);
    d.H.col(k).head(k + 1) = coeff.head(k + 1);
    h = w.norm();
    if (h <= policy.breakdown_tol * op.norm2_estimate()) {
      d.breakdown = true;
      ++k;
      break;
    }
    if (k + 1 == m) {
      ++k;
      break;
    }
    if (should_stop_lucky(policy, d.beta, h)) {
      d.lucky_stop = true;
      ++k;
      break;
    }
    d.H(k + 1, k) = h;
    d.V.col(k + 1) = w / h;
  }
  finalize(d, k, h, w);
  return d;
}

KrylovDecomposition lanczos(const LinearOperator& op, const CVector& v,
                            Index m, const OrthPolicy& policy) {
  if (op.structure() != Structure::hermitian)
    throw InvalidArgument("lanczos: operator is not flagged Hermitian");
  check_inputs(op, v, m, policy);
  auto apply = [&op](const CVector& x, CVector& y) { y = op.apply(x); };
  return run_lanczos(apply, op.n(), op.norm2_estimate(), v, m, policy, 1.0);
}

KrylovDecomposition krylov(const LinearOperator& op, const CVector& v,
                           Index m, const OrthPolicy& policy) {
  if (op.structure() == Structure::hermitian)
    return lanczos(op, v, m, policy);
  if (const LinearOperator* b = op.hermitian_generator()) {
    check_inputs(op, v, m, policy);
    auto apply = [b](const CVector& x, CVector& y) { y = b->apply(x); };
    return run_lanczos(apply, op.n(), b->norm2_estimate(), v, m, policy,
                       op.generator_scale());
  }
  return arnoldi(op, v, m, policy);
}

KrylovDecomposition KrylovDecomposition::prefix(Index k) const {
  if (k < 1 || k > m)
    throw InvalidArgument("KrylovDecomposition::prefix: k out of range");
  if (k == m) return *this;
  KrylovDecomposition d;
  d.V = V.leftCols(k + 1);
  d.H = H.topLeftCorner(k, k);
  d.beta = beta;
  d.sigma = sigma;
  d.h_next = std::abs(H(k, k - 1));
  d.has_next = true;
  d.m = k;
  d.matvecs = k;
  if (tridiagonal) d.tridiagonal = tridiagonal->topLeftCorner(k, k);
  for (Index j = 0; j + 1 < k; ++j) {
    const Complex s = H(j + 1, j);
    d.log_gamma += std::log(std::abs(s));
    d.gamma_phase *= s / std::abs(s);
  }
  return d;
}

std::vector<Complex> KrylovDecomposition::ritz() const {
  if (tridiagonal) {
    std::vector<Complex> out;
    for (double x : symmetric_eigenvalues(*tridiagonal))
      out.push_back(sigma * x);
    return out;
  }
  return ritz_values(H);
}

CVector KrylovDecomposition::lift(const CVector& y) const {
  if (y.size() != m) throw InvalidArgument("lift: coefficient length != m");
  return beta * (V.leftCols(m) * y);
}

CVector KrylovDecomposition::propagator(const CVector& v, int p,
                                        double t) const {
  if (v.size() != n()) throw InvalidArgument("propagator: dimension mismatch");
  if (p < 0 || t < 0.0)
    throw InvalidArgument("propagator: need p >= 0 and t >= 0");
  const CVector y = t * (H * phi_action(H, p + 1, t, 1.0));
  return v / std::tgamma(p + 1.0) + lift(y);
}

double decomposition_residual(const KrylovDecomposition& dec,
                              const LinearOperator& op) {
  const Index m = dec.m;
  CMatrix r(dec.n(), m);
  for (Index j = 0; j < m; ++j) r.col(j) = op.apply(dec.V.col(j));
  r -= dec.V.leftCols(m) * dec.H;
  r.col(m - 1) -= dec.sigma * dec.h_next * dec.V.col(m);
  const CMatrix g = r.adjoint() * r;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
}

double orthogonality_level(const KrylovDecomposition& dec) {
  const Index cols = dec.has_next ? dec.m + 1 : dec.m;
  const CMatrix v = dec.V.leftCols(cols);
  const CMatrix g = v.adjoint() * v - CMatrix::Identity(cols, cols);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(g, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace kexp
