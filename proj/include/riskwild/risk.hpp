#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "riskwild/common.hpp"
#include "riskwild/engine.hpp"
#include "riskwild/losses.hpp"
#include "riskwild/models.hpp"

#include "json.hpp"

namespace riskwild {

struct SupSettings {
  int iterations = 200;
  int restarts = 10;
  std::uint64_t seed = 0;
};

// sup over class members f with |f - center|_n <= r of
// (1/n) sum_i <v_i, f(x_i) - center(x_i)>.
//
// Unconstrained class: closed form r * |v|_n. Linear class: projected
// gradient ascent over coefficients, with the ball projection applied in the
// whitened coordinates of the feature Gram factorization.
double sup_process(const Predictor& center, const std::vector<Vec>& v, double r,
                   const FixedDesignDataset& ds, const FunctionClass& cls,
                   const SupSettings& settings = {});

// Empirical processes driven by the signed pilot gradients: v_i = eps_i g_i
// for W and v_i = -eps_i g_i for T, both centered at f_hat.
double process_W(const WildRefitOutput& out, double r, const FunctionClass& cls,
                 const SupSettings& settings = {});
double process_T(const WildRefitOutput& out, double r, const FunctionClass& cls,
                 const SupSettings& settings = {});

// The quadratic term of the wild optimism admits two normalizations; the
// proof-consistent one (no extra 1/n on top of the empirical norm) is the one
// under which the refit-radius domination holds deterministically. The
// literal variant divides the quadratic term by n once more.
enum class OptimismVariant { proof_consistent, literal };

double wild_optimism_diamond(const WildRefitOutput& out, const LossSpec& spec,
                             OptimismVariant variant = OptimismVariant::proof_consistent);
double wild_optimism_sharp(const WildRefitOutput& out, const LossSpec& spec,
                           OptimismVariant variant = OptimismVariant::proof_consistent);

// Pilot error terms: suprema over the 2r ball at f_hat driven by
// v_i = eps_i (grad1(f_star(x_i), y_i) - g_i), and its negation.
std::pair<double, double> pilot_errors(const WildRefitOutput& out, const Predictor& f_star,
                                       const LossSpec& spec, double r, const FunctionClass& cls,
                                       const SupSettings& settings = {});

struct BoundInputs {
  double opt_diamond = 0.0;
  double opt_sharp = 0.0;
  std::optional<double> empirical_excess;  // oracle-side input
  std::optional<double> training_error;    // observable surrogate
  std::optional<double> pilot_diamond;
  std::optional<double> pilot_sharp;
  std::optional<double> bias_norm;  // |f_dagger - f_star|_n
  double r = 0.0;
  double beta = 0.0, alpha = 0.0, sigma = 0.0, t = 0.0;
  int n = 0, d = 0;
  bool observable_mode = false;
  OptimismVariant variant = OptimismVariant::proof_consistent;
  bool well_specified = false;
  std::optional<double> W_at_r_diamond;  // diagnostics echoed into the report
  std::optional<double> T_at_r_sharp;
};

struct BoundReport {
  double opt_diamond = 0.0, opt_sharp = 0.0;
  double empirical_term = 0.0;  // empirical excess risk, or its training-error surrogate
  double pilot_diamond = 0.0, pilot_sharp = 0.0;
  double bias_norm = 0.0;
  double deviation = 0.0;
  double total_bound = 0.0;
  double confidence = 0.0;  // 1 - 6 exp(-t^2)
  double r = 0.0, beta = 0.0, alpha = 0.0, sigma = 0.0, t = 0.0;
  int n = 0, d = 0;
  bool observable_mode = false;
  bool pilots_omitted = false;
  bool bias_omitted = false;
  bool well_specified = false;
  OptimismVariant variant = OptimismVariant::proof_consistent;
  std::optional<double> W_at_r_diamond;
  std::optional<double> T_at_r_sharp;

  nlohmann::json to_json() const;
};

// (beta/alpha) * empirical + (beta/alpha) * (opt_d + opt_s + B_d + B_s)
//   + [(5 sqrt(d) + 3 sqrt(log n) + 4) r + bias] * 2 sqrt(2) beta sigma t / (alpha sqrt(n))
BoundReport excess_risk_bound(const BoundInputs& in);

// Recomputes total_bound from the stored pieces; bit-identical to the field.
double assemble_total(const BoundReport& rep);

double deviation_term(double r, double bias_norm, double beta, double alpha, double sigma,
                      double t, int n, int d);

struct FixedPointResult {
  double r = 0.0;
  bool saturated = false;  // the crossing lies beyond r_max
};

// Largest r in (0, r_max] with r <= sqrt((2/alpha) (Wf(2r) + Tf(2r))),
// located by bisection on h(r) = sqrt(...) - r. Returns 0 when no positive
// solution exists; returns r_max with the saturation flag when h(r_max) > 0.
FixedPointResult fixed_point_radius(const std::function<double(double)>& Wf,
                                    const std::function<double(double)>& Tf, double alpha,
                                    double r_max, double tol);

// Direct pilot-distance bound (split square-root form):
// sqrt((2/a)(W+T)) + sqrt((2/a)(B_d+B_s)) + ((10 sqrt(d) + 6 sqrt(log n) + 4)/a + 1)
//   * 2 sqrt(2) sigma t / sqrt(n); valid with probability 1 - 2 exp(-t^2).
double radius_bound_direct(double W2r, double T2r, double B_d, double B_s, double alpha,
                           double sigma, double t, int n, int d);

struct ScaleTunedRadiusBound {
  double full = 0.0;        // solved quadratic with pilot and deviation terms
  double simplified = 0.0;  // max{r_d, r_s, 4W/(a r_d) + 4T/(a r_s)}
};

// Radius bound driven by the two refit radii, trading the radius tuning of
// the direct bound for noise-scale tuning.
ScaleTunedRadiusBound radius_bound_scale_tuned(double r_d, double r_s, double W2rd, double T2rs,
                                               double B_d, double B_s, double alpha,
                                               double sigma, double t, int n, int d);

struct RhoTuneResult {
  double rho = 0.0;
  double achieved = 0.0;
  bool converged = false;
  std::vector<std::pair<double, double>> scan;  // (rho, achieved radius)
};

// Searches rho so that the chosen side's refit radius hits target_radius.
// Scans a geometric grid for a sign change of (radius - target) and bisects;
// when no sign change exists (the radius curve may be V-shaped), minimizes
// the gap around the best grid point instead. eps stays fixed across all
// evaluations.
RhoTuneResult tune_rho_for_radius(const PilotFit& pilot, const Trainer& trainer,
                                  const FixedDesignDataset& ds, const LossSpec& spec,
                                  const std::vector<int>& eps, double target_radius,
                                  WildSide side, std::pair<double, double> bracket, double tol,
                                  int max_evals, const SolveOptions& opts = {});

// Convenience overload that fits the pilot itself.
RhoTuneResult tune_rho_for_radius(const Trainer& trainer, const FixedDesignDataset& ds,
                                  const LossSpec& spec, const std::vector<int>& eps,
                                  double target_radius, WildSide side,
                                  std::pair<double, double> bracket, double tol, int max_evals,
                                  const SolveOptions& opts = {});

}  // namespace riskwild
