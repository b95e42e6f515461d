#pragma once

#include <optional>
#include <string>
#include <vector>

#include "riskwild/oracle.hpp"
#include "riskwild/risk.hpp"

namespace riskwild {

struct PipelineSettings {
  double t = 2.0;
  double sigma = 1.0;  // sub-Gaussian scale used in the bounds
  OptimismVariant variant = OptimismVariant::proof_consistent;
  SolveOptions solve;
  SupSettings sup;
  double fp_r_max = 1e6;
  double fp_tol = 1e-8;
  std::pair<double, double> rho_bracket{1e-4, 1e4};
  double rho_tol = 1e-6;
  int rho_max_evals = 200;
  int mc_samples = 2000;
  bool compute_symmetrized = false;
  std::optional<double> fixed_rho1;  // bypass tuning when both are set
  std::optional<double> fixed_rho2;
  std::optional<double> target_radius;  // tune to this instead of twice the fixed point
};

// Everything one audit produces. Oracle-side fields are present only when an
// oracle context (known f_star and noise law) was supplied.
struct AuditOutcome {
  std::uint64_t seed = 0;
  WildRefitOutput out;
  FixedPointResult fixed_point;
  RhoTuneResult tune_diamond, tune_sharp;
  double W_at_r_diamond = 0.0, T_at_r_sharp = 0.0;
  double opt_diamond = 0.0, opt_sharp = 0.0;
  bool lemma1_ok = false;
  double lemma1_slack = 0.0;
  BoundReport bound;

  bool has_oracle = false;
  double truth = 0.0, truth_std_error = 0.0;
  double empirical_excess = 0.0;
  double pilot_diamond = 0.0, pilot_sharp = 0.0;
  double bias_norm = 0.0;
  double rhat = 0.0;
  double bound_rhat_direct = 0.0;  // direct radius bound evaluated at 2 rhat
  ScaleTunedRadiusBound bound_rhat_scale_tuned;
  double pilot_radius_rhat = 0.0;  // radius the rhat-bound pilots were evaluated at
  bool covered = false;
  bool rhat_covered = false;
  std::optional<std::pair<double, double>> symmetrized;  // (Z at r*, U at 2r*)
};

struct OracleContext {
  Predictor f_star;
  Predictor f_dagger;
  NoiseModel noise;
  bool well_specified = true;
};

// One full run: pilot fit, sign draw, fixed-point radius, rho tuning to twice
// that radius, both refits, bound assembly (oracle or observable mode), and
// the oracle comparisons when a context is supplied.
AuditOutcome run_single_audit(const LossSpec& spec, const Trainer& trainer,
                              const FunctionClass& cls, const FixedDesignDataset& ds,
                              const PipelineSettings& settings, std::uint64_t seed,
                              const OracleContext* oracle);

struct CoverageRow {
  int rep = 0;
  std::uint64_t seed = 0;
  double r_fixed_point = 0.0;
  double rho1 = 0.0, rho2 = 0.0;
  double opt_diamond = 0.0, opt_sharp = 0.0;
  double B_diamond = 0.0, B_sharp = 0.0;
  double bound_thm1 = 0.0;
  double truth = 0.0;
  bool covered = false;
  bool lemma1_ok = false;
  double rhat = 0.0;
  double bound_thm2 = 0.0;
  bool rhat_covered = false;
  bool failed = false;
  std::string error;
};

struct CoverageReport {
  std::vector<CoverageRow> rows;
  int reps = 0;
  double t = 0.0;
  double coverage_thm1 = 0.0;  // fraction of reps with bound >= truth
  double coverage_thm2 = 0.0;  // fraction of reps with rhat <= its bound
  double lemma1_rate = 0.0;
  double floor_thm1 = 0.0;  // 1 - 6 exp(-t^2)
  double floor_thm2 = 0.0;  // 1 - 2 exp(-t^2)
  int failures = 0;

  bool pass() const {
    return failures == 0 && coverage_thm1 >= floor_thm1 && lemma1_rate == 1.0;
  }
};

struct RhoPolicy {
  enum class Kind { fixed_point, fixed_scales };
  Kind kind = Kind::fixed_point;
  double rho1 = 0.5, rho2 = 0.5;  // fixed_scales only
};

// Repeated audits over regenerated outcomes on a frozen design. Replications
// run concurrently under replication-indexed seeds; aggregation is ordered.
CoverageReport coverage_experiment(const Scenario& scenario, int reps, double t,
                                   const RhoPolicy& policy, std::uint64_t seed,
                                   const PipelineSettings& base_settings = {}, int threads = 0);

std::string coverage_csv(const CoverageReport& report);

}  // namespace riskwild
