#pragma once

#include <functional>

#include "riskwild/common.hpp"

namespace riskwild {

using VectorField = std::function<Vec(const Vec&)>;

struct RootReport {
  Vec root;
  double residual = 0.0;  // |F(root)|
  int iterations = 0;
  bool converged = false;
  bool singular_jacobian = false;
};

// Damped Newton on F(y) = 0 with a forward finite-difference Jacobian
// (step 1e-6 * (1 + |y|)) and backtracking on the residual norm.
RootReport damped_newton(const VectorField& F, const Vec& y0, double tol, int max_iter);

}  // namespace riskwild
