#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "riskwild/common.hpp"
#include "riskwild/engine.hpp"
#include "riskwild/losses.hpp"
#include "riskwild/models.hpp"

namespace riskwild {

// Isotropic law for the gradient noise w = grad1(f_star(x), y). Outcomes are
// manufactured by inverting the loss gradient at f_star(x) against a draw of
// w, which makes the centering E[w | x] = 0 exact by construction.
struct NoiseModel {
  enum class Kind { isotropic_gaussian, isotropic_student_t };
  Kind kind = Kind::isotropic_gaussian;
  double sigma = 1.0;  // directional scale of w; reused as sigma in the bounds
  double df = 5.0;     // student-t only

  Vec sample_gradient(int d, std::mt19937_64& rng) const;
};

enum class DesignRule { uniform_cube, grid };

struct Scenario {
  int n = 0, p = 0, d = 0;
  DesignRule design = DesignRule::uniform_cube;
  Predictor f_star;
  NoiseModel noise;
  LossSpec loss;
  FunctionClass cls;
  Trainer trainer;
  bool well_specified = true;
  int mc_samples = 2000;
};

std::vector<Vec> generate_design(DesignRule rule, int n, int p, std::uint64_t seed);

FixedDesignDataset sample_outcomes(const std::vector<Vec>& design, const Predictor& f_star,
                                   const NoiseModel& noise, const LossSpec& spec,
                                   std::uint64_t seed);

// Covariates from the design rule, outcomes from the noise model.
std::pair<FixedDesignDataset, Predictor> gen_fixed_design(const Scenario& scenario,
                                                          std::uint64_t seed);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Average over fresh outcomes of the per-point loss gap between f_hat and
// f_star. For the squared loss this collapses to |f_hat - f_star|_n^2 exactly.
McEstimate true_excess_risk(const Predictor& f_hat, const Predictor& f_star,
                            const LossSpec& spec, const NoiseModel& noise,
                            const FixedDesignDataset& ds, int mc_samples, std::uint64_t seed);

// (1/n) sum [l(f_hat(x_i), y_i) - l(f_star(x_i), y_i)]; negative for exact ERM
// over a class containing f_star.
double empirical_excess_risk(const Predictor& f_hat, const Predictor& f_star,
                             const FixedDesignDataset& ds, const LossSpec& spec);

// (1/n) sum <grad1(f_star(x_i), y_i), f_hat(x_i) - other(x_i)> with
// other = f_star (true optimism) or the best-in-class map (oracle optimism).
double true_optimism(const Predictor& f_hat, const Predictor& f_star,
                     const FixedDesignDataset& ds, const LossSpec& spec);
double oracle_optimism(const Predictor& f_hat, const Predictor& f_dagger,
                       const Predictor& f_star, const FixedDesignDataset& ds,
                       const LossSpec& spec);

// Minimizer of the population risk over the class. Well-specified scenarios
// return f_star itself; squared loss projects the f_star values onto the
// class; otherwise an ERM run on a Monte Carlo augmented dataset.
Predictor best_in_class(const FunctionClass& cls, const NoiseModel& noise,
                        const Predictor& f_star, const FixedDesignDataset& ds,
                        const LossSpec& spec, int mc_samples, bool well_specified,
                        std::uint64_t seed);

// Conditionally independent copy of the gradient noise given its direction:
// collinear with w, sign symmetric, magnitude from the radial law. Returns the
// zero vector when w = 0 (the conditioning is vacuous there).
Vec sample_conditional_copy(const NoiseModel& noise, const Vec& w, std::mt19937_64& rng);

// Symmetrized empirical processes built from conditional noise copies:
// Z over the r-ball at f_dagger and U over the 2r-ball at f_hat, sharing one
// fresh sign draw. Diagnostics only; both are computed through sup_process.
std::pair<double, double> symmetrized_processes(const WildRefitOutput& out,
                                                const Predictor& f_star,
                                                const Predictor& f_dagger,
                                                const NoiseModel& noise, const LossSpec& spec,
                                                const FunctionClass& cls, double r,
                                                std::uint64_t seed);

}  // namespace riskwild
