#include "kexp/small_dense.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <Eigen/Eigenvalues>

namespace kexp {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
// Entries below this magnitude are treated as converged; they sit in the
// subnormal range where relative accuracy is unattainable anyway.
constexpr double kTinyEntry = 1e-290;

double norm1(const CMatrix& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Longest shortest-path length in the directed graph of the sparsity
// pattern. After that many Taylor terms every structurally reachable entry
// has received its first contribution.
Index fill_depth(const CMatrix& x) {
  const Index k = x.rows();
  Index depth = 0;
  std::vector<Index> dist(k);
  for (Index src = 0; src < k; ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[src] = 0;
    std::queue<Index> q;
    q.push(src);
    while (!q.empty()) {
      const Index l = q.front();
      q.pop();
      for (Index i = 0; i < k; ++i) {
        if (dist[i] < 0 && x(i, l) != Complex{}) {
          dist[i] = dist[l] + 1;
          depth = std::max(depth, dist[i]);
          q.push(i);
        }
      }
    }
  }
  return depth;
}

// Taylor series of exp(x) for norm1(x) <= 1, truncated once every entry
// of the latest term is negligible relative to the same entry of the sum.
CMatrix taylor_entrywise(const CMatrix& x) {
  const Index k = x.rows();
  const Index depth = fill_depth(x);
  const Index max_terms = depth + 60;
  CMatrix sum = CMatrix::Identity(k, k);
  CMatrix term = CMatrix::Identity(k, k);
  for (Index j = 1; j <= max_terms; ++j) {
    term = (term * x) / static_cast<double>(j);
    sum += term;
    if (j < depth) continue;
    bool converged = true;
    for (Index c = 0; c < k && converged; ++c) {
      for (Index r = 0; r < k; ++r) {
        const double a = std::abs(term(r, c));
        if (a <= kTinyEntry) continue;
        if (a > 0.5 * kEps * std::abs(sum(r, c))) {
          converged = false;
          break;
        }
      }
    }
    if (converged) break;
  }
  return sum;
}

bool all_finite(const CMatrix& a) {
  return a.allFinite();
}

}  // namespace

CMatrix expm(const CMatrix& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("expm: matrix not square");
  if (m.rows() > kSmallDenseGuard)
    throw InvalidArgument("expm: dimension exceeds guard");
  if (m.rows() == 0) return m;
  if (!all_finite(m)) throw NumericalError("expm: non-finite input");

  const double nrm = norm1(m);
  int squarings = 0;
  if (nrm > 1.0) squarings = static_cast<int>(std::ceil(std::log2(nrm)));
  const CMatrix x = m / std::ldexp(1.0, squarings);
  CMatrix e = taylor_entrywise(x);
  for (int s = 0; s < squarings; ++s) {
    e = e * e;
    if (!all_finite(e))
      throw NumericalError("expm: overflow during squaring phase (step " +
                           std::to_string(s + 1) + " of " +
                           std::to_string(squarings) + ")");
  }
  return e;
}

CVector ScaledColumn::values() const {
  CVector v(mantissa.size());
  for (Index j = 0; j < mantissa.size(); ++j)
    v[j] = mantissa[j] * std::exp(static_cast<double>(j) * log_ratio);
  return v;
}

ScaledColumn expm_first_column(const CMatrix& x) {
  const Index k = x.rows();
  ScaledColumn out;
  if (k <= 1) {
    out.mantissa = expm(x).col(0);
    return out;
  }
  // Leading-order size of exp(x)_{k,1} is prod(subdiag)/(k-1)!; pick the
  // geometric ratio that maps it to O(1).
  double log_sub = 0.0;
  bool positive_subdiag = true;
  for (Index j = 0; j + 1 < k; ++j) {
    const double a = std::abs(x(j + 1, j));
    if (a == 0.0) {
      positive_subdiag = false;
      break;
    }
    log_sub += std::log(a);
  }
  double log_c = 0.0;
  if (positive_subdiag) {
    log_c = (log_sub - std::lgamma(static_cast<double>(k))) /
            static_cast<double>(k - 1);
    log_c = std::min(log_c, 0.0);
  }
  if (log_c < 0.0) {
    CMatrix xs = x;
    for (Index c = 0; c < k; ++c)
      for (Index r = 0; r < k; ++r)
        if (xs(r, c) != Complex{})
          xs(r, c) *= std::exp(static_cast<double>(c - r) * log_c);
    out.mantissa = expm(xs).col(0);
    out.log_ratio = log_c;
  } else {
    out.mantissa = expm(x).col(0);
  }
  return out;
}

AugmentedHessenberg AugmentedHessenberg::build(const CMatrix& h, int p) {
  if (p < 0) throw InvalidArgument("AugmentedHessenberg: p must be >= 0");
  const Index m = h.rows();
  AugmentedHessenberg a;
  a.base = h;
  a.p = p;
  a.full = CMatrix::Zero(m + p, m + p);
  a.full.topLeftCorner(m, m) = h;
  if (p > 0) {
    a.full(m, m - 1) = 1.0;
    for (int j = 1; j < p; ++j) a.full(m + j, m + j - 1) = 1.0;
  }
  return a;
}

CVector phi_action(const CMatrix& h, int p, double t, double beta) {
  if (t < 0.0) throw InvalidArgument("phi_action: t must be >= 0");
  if (p < 0) throw InvalidArgument("phi_action: p must be >= 0");
  const Index m = h.rows();
  if (t == 0.0) {
    CVector y = CVector::Zero(m);
    y[0] = beta / std::tgamma(static_cast<double>(p) + 1.0);
    return y;
  }
  if (p == 0) return beta * expm_first_column(t * h).values();
  // [[tH, e_1 e_1^T], [0, J_up]]: the last column carries phi_p(tH) e_1.
  CMatrix k = CMatrix::Zero(m + p, m + p);
  k.topLeftCorner(m, m) = t * h;
  k(0, m) = 1.0;
  for (int j = 0; j + 1 < p; ++j) k(m + j, m + j + 1) = 1.0;
  const CMatrix e = expm(k);
  return beta * e.block(0, m + p - 1, m, 1);
}

ScaledComplex corner_phi_scaled(const CMatrix& h, int p, double t,
                                double beta) {
  if (t < 0.0) throw InvalidArgument("corner_phi: t must be >= 0");
  const auto aug = AugmentedHessenberg::build(h, p);
  const Index k = aug.full.rows();
  if (t == 0.0) {
    // e_k^* I e_1
    return {k == 1 ? Complex(beta) : Complex{}, 0.0};
  }
  const ScaledColumn col = expm_first_column(t * aug.full);
  ScaledComplex r = col.entry(k - 1);
  r.mantissa *= beta;
  return r;
}

Complex corner_phi(const CMatrix& h, int p, double t, double beta) {
  return corner_phi_scaled(h, p, t, beta).value();
}

NodeSet::NodeSet(std::vector<Complex> n, int pad)
    : nodes(std::move(n)), padding(pad) {
  if (pad < 0) throw InvalidArgument("NodeSet: padding must be >= 0");
  if (size() == 0) throw InvalidArgument("NodeSet: empty node list");
}

std::vector<Complex> NodeSet::padded() const {
  std::vector<Complex> all = nodes;
  all.resize(nodes.size() + static_cast<std::size_t>(padding), Complex{});
  return all;
}

NodeSet NodeSet::real_parts() const {
  std::vector<Complex> re;
  re.reserve(nodes.size());
  for (const auto& z : nodes) re.emplace_back(z.real(), 0.0);
  return NodeSet(std::move(re), padding);
}

ScaledComplex divided_differences_exp_scaled(const NodeSet& ns, double t) {
  if (t < 0.0) throw InvalidArgument("divided_differences_exp: t must be >= 0");
  const auto all = ns.padded();
  const Index k = static_cast<Index>(all.size());
  if (k == 0) throw InvalidArgument("divided_differences_exp: empty node set");
  if (t == 0.0) return {k == 1 ? Complex(1.0) : Complex{}, 0.0};
  CMatrix theta = CMatrix::Zero(k, k);
  for (Index j = 0; j < k; ++j) {
    theta(j, j) = t * all[j];
    if (j + 1 < k) theta(j + 1, j) = t;
  }
  return expm_first_column(theta).entry(k - 1);
}

Complex divided_differences_exp(const NodeSet& ns, double t) {
  return divided_differences_exp_scaled(ns, t).value();
}

std::vector<Complex> ritz_values(const CMatrix& h) {
  if (h.rows() != h.cols()) throw InvalidArgument("ritz_values: not square");
  if (h.rows() == 0) return {};
  Eigen::ComplexEigenSolver<CMatrix> es;
  es.setMaxIterations(60 * static_cast<Index>(h.rows()));
  es.compute(h, false);
  if (es.info() != Eigen::Success)
    throw NumericalError("ritz_values: eigensolver did not converge");
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

std::vector<double> symmetric_eigenvalues(const RMatrix& t) {
  if (t.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<RMatrix> es(t, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalError("symmetric_eigenvalues: no convergence");
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

}  // namespace kexp
