#pragma once

#include <functional>
#include <vector>

namespace kexp {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  bool converged = true;   // false when the subdivision limit was hit
  int intervals = 0;
};

/// Adaptive 15-point Gauss-Kronrod on [a, b]. The interval is first split
/// at the given breakpoints; each piece is bisected until its error
/// estimate is below max(abs_tol, rel_tol * |piece|) scaled to its share.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f,
                                    double a, double b, double abs_tol,
                                    double rel_tol,
                                    const std::vector<double>& breakpoints = {},
                                    int max_depth = 30);

/// 20-point Gauss-Legendre nodes and weights on [0, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre_unit();

}  // namespace kexp
