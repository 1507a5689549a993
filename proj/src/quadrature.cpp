#include "kexp/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kexp/common.hpp"

namespace kexp {

QuadratureResult integrate_adaptive(const std::function<double(double)>& f,
                                    double a, double b, double abs_tol,
                                    double rel_tol,
                                    const std::vector<double>& breakpoints,
                                    int max_depth) {
  if (!(b >= a)) throw InvalidArgument("integrate_adaptive: need a <= b");
  std::vector<double> cuts{a};
  for (double c : breakpoints)
    if (c > a && c < b) cuts.push_back(c);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  QuadratureResult out;
  double l1_total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    double err = 0.0, l1 = 0.0;
    const double v = GK::integrate(f, cuts[i], cuts[i + 1],
                                   static_cast<unsigned>(max_depth), rel_tol,
                                   &err, &l1);
    out.value += v;
    out.error_estimate += err;
    l1_total += l1;
    ++out.intervals;
  }
  if (!std::isfinite(out.value))
    throw NumericalError("integrate_adaptive: non-finite integrand");
  out.converged =
      out.error_estimate <= std::max(abs_tol, rel_tol * l1_total) * 1.0000001;
  return out;
}

GaussRule gauss_legendre_unit() {
  using G = boost::math::quadrature::gauss<double, 20>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  GaussRule r;
  // Boost stores the nonnegative half of the symmetric rule.
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      r.nodes.push_back(0.5);
      r.weights.push_back(0.5 * w[i]);
      continue;
    }
    r.nodes.push_back(0.5 * (1.0 - x[i]));
    r.weights.push_back(0.5 * w[i]);
    r.nodes.push_back(0.5 * (1.0 + x[i]));
    r.weights.push_back(0.5 * w[i]);
  }
  return r;
}

}  // namespace kexp
