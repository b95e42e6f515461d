#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "riskwild/common.hpp"
#include "riskwild/losses.hpp"
#include "riskwild/models.hpp"

namespace riskwild {

enum class SolveMethod { automatic, newton, ppa };

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 100;
  SolveMethod method = SolveMethod::automatic;
};

struct SolveReport {
  Vec y;
  double residual_norm = 0.0;  // |grad1(z, y) - g_target|
  int iterations = 0;
  std::string method;  // "closed-form" | "newton" | "ppa"
};

struct SolveFailure : std::runtime_error {
  SolveFailure(const std::string& msg, double best_residual_, int sample_index_ = -1)
      : std::runtime_error(msg), best_residual(best_residual_), sample_index(sample_index_) {}
  double best_residual = 0.0;
  int sample_index = -1;
};

// Elementwise targets (1 - 2 rho1 eps_i) g_i and (1 + 2 rho2 eps_i) g_i.
std::pair<std::vector<Vec>, std::vector<Vec>> wild_target_gradients(
    const std::vector<Vec>& g_tilde, const std::vector<int>& eps, double rho1, double rho2);

// Solves grad1(z, y) = g_target for y. Dispatch: closed form when the loss
// provides one, else damped Newton on the residual, else a proximal-point
// fallback on the monotone operator y -> g_target - grad1(z, y).
SolveReport solve_wild_response(const LossSpec& spec, const Vec& z, const Vec& g_target,
                                const SolveOptions& opts, const Vec& y0);

using MonotoneOperator = std::function<Vec(const Vec&)>;

struct PpaOptions {
  std::function<double(int)> c =
      [](int) { return 1.0; };  // positive, nondecreasing step sizes
  std::function<double(int)> delta =
      [](int k) { return std::pow(0.5, k); };  // summable inexactness budget
  double tol = 1e-8;
  int max_outer = 100;
  int inner_max_iter = 60;
};

struct PpaReport {
  Vec z;
  double residual = 0.0;  // |op(z)|
  int outer_iterations = 0;
  bool converged = false;
  // Inner acceptance rule |S_k(z_{k+1})| <= (delta_k / c_k) |z_{k+1} - z_k|
  // held at every accepted outer step.
  bool inner_rule_ok = true;
  std::vector<double> residual_trace;
};

// Inexact proximal point iteration for a root of a monotone operator. Each
// outer step approximately evaluates the resolvent (I + c_k op)^{-1} by
// damped Newton on S_k(z) = op(z) + (z - z_k)/c_k.
PpaReport ppa_solve(const MonotoneOperator& op, const Vec& z0, const PpaOptions& opts);

struct WildBuild {
  FixedDesignDataset d_diamond;
  FixedDesignDataset d_sharp;
  std::vector<SolveReport> reports_diamond;
  std::vector<SolveReport> reports_sharp;
};

// Constructs both perturbed datasets. Covariates are shared with ds; every
// outcome satisfies its gradient equation within opts.tol or the build aborts
// with the failing sample index.
WildBuild build_wild_datasets(const FixedDesignDataset& ds, const Predictor& f_hat,
                              const LossSpec& spec, const std::vector<int>& eps, double rho1,
                              double rho2, const SolveOptions& opts = {});

}  // namespace riskwild
