#pragma once

#include <functional>
#include <string>

#include "riskwild/common.hpp"

namespace riskwild {

// A convex loss l(z, y) on R^d x R^d together with everything the refitting
// machinery needs to know about it: beta-smoothness and mu-strong convexity
// in the first argument, monotonicity of -grad1 in the second argument, and
// (when available) a closed-form solve of grad1(z, y) = g in y.
//
// mu doubles as the alpha constant in every bound this library assembles.
struct LossSpec {
  std::string name;
  double beta = 0.0;  // smoothness constant, beta >= mu
  double mu = 0.0;    // strong convexity constant, > 0
  bool strictly_monotone_in_y = false;
  std::function<double(const Vec& z, const Vec& y)> value;
  std::function<Vec(const Vec& z, const Vec& y)> grad1;
  // Solves grad1(z, y) = g_target for y. Empty when no closed form exists.
  std::function<Vec(const Vec& z, const Vec& g_target)> inverse_in_y;

  bool has_inverse() const { return static_cast<bool>(inverse_in_y); }
};

double loss_value(const LossSpec& spec, const Vec& z, const Vec& y);
Vec loss_grad1(const LossSpec& spec, const Vec& z, const Vec& y);

// Max over coordinates of |grad1 - central difference of value| / (1 + |grad1|).
double grad_fd_check(const LossSpec& spec, const Vec& z, const Vec& y, double h);

// l(u, y) = |u - y|^2, beta = mu = 2, inverse y = z - g/2.
LossSpec squared_loss();

// Log-partition function for the regularized exponential-family loss,
// with global curvature bounds used to derive beta and mu.
struct LogPartition {
  std::string name;
  std::function<double(const Vec&)> A;
  std::function<Vec(const Vec&)> gradA;
  double hess_min = 0.0;  // inf_z lambda_min(hess A)
  double hess_max = 0.0;  // sup_z lambda_max(hess A)
};

// Registry: "gaussian" (A = |z|^2/2) and "softplus-sum" (A = sum log(1+e^{z_j})).
LogPartition log_partition(const std::string& name);

// l(z, y) = A(z) - z.y + (mu_reg/2)|z|^2; inverse y = gradA(z) + mu_reg*z - g.
LossSpec expfam_loss(const LogPartition& lp, double mu_reg);

// l(x, y) = (x-y)'A(x-y) + b'(x-y) with A symmetric. Constants come from the
// spectrum of A; a non-positive-definite A produces a spec whose claimed
// constants the checker will falsify.
LossSpec quadform_loss(const Mat& A, const Vec& b);

// Numerical audit of the loss regularity conditions on sampled triples.
// Positive violation entries mean the corresponding condition failed by that
// amount; pass() applies a common slack.
struct Assumption1Report {
  int trials = 0;
  double smoothness_violation = 0.0;    // upper quadratic bound deficit
  double convexity_violation = 0.0;     // lower quadratic bound deficit
  double monotonicity_violation = 0.0;  // max <g1(z,y1)-g1(z,y2), y1-y2>
  double coercivity_increase = 0.0;     // max increase of the radial slope ladder
  double coercivity_tail_slope = 0.0;   // radial slope at the largest radius; must be < 0
  double slack = 1e-9;

  bool coercive() const { return coercivity_tail_slope < 0.0; }
  bool pass() const {
    return smoothness_violation <= slack && convexity_violation <= slack &&
           monotonicity_violation <= slack && coercivity_increase <= slack && coercive();
  }
};

// Yields one (a, b, c) triple per call. The checker reads it as (z1, z2, y)
// for the two-point curvature bounds and as (z, y1, y2) for monotonicity.
using TripleSampler = std::function<void(Vec& a, Vec& b, Vec& c)>;

Assumption1Report check_assumption1(const LossSpec& spec, const TripleSampler& sampler,
                                    int trials);

TripleSampler gaussian_triple_sampler(int dim, double scale, std::uint64_t seed);

}  // namespace riskwild
