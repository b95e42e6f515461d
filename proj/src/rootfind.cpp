#include "riskwild/rootfind.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace riskwild {

namespace {

Mat fd_jacobian(const VectorField& F, const Vec& y, const Vec& Fy) {
  const int d = static_cast<int>(y.size());
  const double step = 1e-6 * (1.0 + y.norm());
  Mat J(d, d);
  Vec yp = y;
  for (int j = 0; j < d; ++j) {
    yp(j) = y(j) + step;
    J.col(j) = (F(yp) - Fy) / step;
    yp(j) = y(j);
  }
  return J;
}

}  // namespace

RootReport damped_newton(const VectorField& F, const Vec& y0, double tol, int max_iter) {
  RootReport rep;
  rep.root = y0;
  Vec Fy = F(rep.root);
  rep.residual = Fy.norm();

  for (int it = 0; it < max_iter && rep.residual > tol; ++it) {
    const Mat J = fd_jacobian(F, rep.root, Fy);
    Eigen::PartialPivLU<Mat> lu(J);
    Vec step = lu.solve(-Fy);
    if (!step.allFinite()) {
      rep.singular_jacobian = true;
      return rep;
    }

    // Backtrack until the residual decreases.
    double t = 1.0;
    Vec candidate;
    Vec Fc;
    double rc = rep.residual;
    while (t > 1e-14) {
      candidate = rep.root + t * step;
      Fc = F(candidate);
      rc = Fc.norm();
      if (std::isfinite(rc) && rc <= (1.0 - 1e-4 * t) * rep.residual) break;
      t *= 0.5;
    }
    if (t <= 1e-14 || rc >= rep.residual) {
      rep.singular_jacobian = true;  // no productive direction; caller may fall back
      return rep;
    }
    rep.root = candidate;
    Fy = Fc;
    rep.residual = rc;
    ++rep.iterations;
  }
  rep.converged = rep.residual <= tol;
  return rep;
}

}  // namespace riskwild
