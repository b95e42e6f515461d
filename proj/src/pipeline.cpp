#include "riskwild/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace riskwild {

namespace {

constexpr std::uint64_t kEpsStream = 101;
constexpr std::uint64_t kTruthStream = 211;
constexpr std::uint64_t kDaggerStream = 223;
constexpr std::uint64_t kSymStream = 227;

// Canonical scale when the radius target degenerates to zero: the diamond
// perturbation cancels the gradient exactly at rho = 1/2, eps = +1.
constexpr double kDegenerateRho = 0.5;

}  // namespace

AuditOutcome run_single_audit(const LossSpec& spec, const Trainer& trainer,
                              const FunctionClass& cls, const FixedDesignDataset& ds,
                              const PipelineSettings& settings, std::uint64_t seed,
                              const OracleContext* oracle) {
  AuditOutcome audit;
  audit.seed = seed;

  const PilotFit pilot = prepare_pilot(trainer, ds, spec);
  const std::vector<int> eps = rademacher(ds.n(), derive_seed(seed, kEpsStream));
  const double alpha = spec.mu;

  // Data-driven radius from the fixed-point inequality on W and T.
  WildRefitOutput probe;  // enough state for the process evaluations
  probe.f_hat = pilot.f_hat;
  probe.g_tilde = pilot.g_tilde;
  probe.eps = eps;
  probe.d0 = ds;
  auto Wf = [&](double s) { return process_W(probe, s, cls, settings.sup); };
  auto Tf = [&](double s) { return process_T(probe, s, cls, settings.sup); };
  audit.fixed_point = fixed_point_radius(Wf, Tf, alpha, settings.fp_r_max, settings.fp_tol);
  const double r = audit.fixed_point.r;
  const double target = settings.target_radius.value_or(2.0 * r);

  // Tune both noise scales against the target radius, holding eps fixed.
  if (settings.fixed_rho1 && settings.fixed_rho2) {
    audit.tune_diamond.rho = *settings.fixed_rho1;
    audit.tune_sharp.rho = *settings.fixed_rho2;
    audit.tune_diamond.converged = true;
    audit.tune_sharp.converged = true;
  } else if (target <= settings.rho_tol) {
    audit.tune_diamond.rho = kDegenerateRho;
    audit.tune_sharp.rho = kDegenerateRho;
    audit.tune_diamond.converged = true;
    audit.tune_sharp.converged = true;
  } else {
    audit.tune_diamond =
        tune_rho_for_radius(pilot, trainer, ds, spec, eps, target, WildSide::diamond,
                            settings.rho_bracket, settings.rho_tol, settings.rho_max_evals,
                            settings.solve);
    audit.tune_sharp =
        tune_rho_for_radius(pilot, trainer, ds, spec, eps, target, WildSide::sharp,
                            settings.rho_bracket, settings.rho_tol, settings.rho_max_evals,
                            settings.solve);
  }

  const SideRefit diamond = refit_side(pilot, trainer, ds, spec, audit.tune_diamond.rho,
                                       WildSide::diamond, eps, settings.solve);
  const SideRefit sharp = refit_side(pilot, trainer, ds, spec, audit.tune_sharp.rho,
                                     WildSide::sharp, eps, settings.solve);

  WildRefitOutput& out = audit.out;
  out.f_hat = pilot.f_hat;
  out.f_diamond = diamond.f;
  out.f_sharp = sharp.f;
  out.d0 = ds;
  out.d_diamond = diamond.dataset;
  out.d_sharp = sharp.dataset;
  out.eps = eps;
  out.g_tilde = pilot.g_tilde;
  out.rho1 = audit.tune_diamond.rho;
  out.rho2 = audit.tune_sharp.rho;
  out.r_diamond = diamond.radius;
  out.r_sharp = sharp.radius;
  out.seed = seed;
  out.trainer_stationarity = {pilot.stationarity, diamond.stationarity, sharp.stationarity};
  out.solves_diamond = diamond.solves;
  out.solves_sharp = sharp.solves;

  audit.W_at_r_diamond = process_W(out, out.r_diamond, cls, settings.sup);
  audit.T_at_r_sharp = process_T(out, out.r_sharp, cls, settings.sup);
  audit.opt_diamond = wild_optimism_diamond(out, spec, settings.variant);
  audit.opt_sharp = wild_optimism_sharp(out, spec, settings.variant);
  audit.lemma1_slack = trainer.tolerance + 1e-8;
  audit.lemma1_ok = audit.W_at_r_diamond <= audit.opt_diamond + audit.lemma1_slack &&
                    audit.T_at_r_sharp <= audit.opt_sharp + audit.lemma1_slack;

  BoundInputs inputs;
  inputs.opt_diamond = audit.opt_diamond;
  inputs.opt_sharp = audit.opt_sharp;
  inputs.r = r;
  inputs.beta = spec.beta;
  inputs.alpha = alpha;
  inputs.sigma = settings.sigma;
  inputs.t = settings.t;
  inputs.n = ds.n();
  inputs.d = ds.d();
  inputs.variant = settings.variant;
  inputs.W_at_r_diamond = audit.W_at_r_diamond;
  inputs.T_at_r_sharp = audit.T_at_r_sharp;

  if (oracle == nullptr) {
    inputs.observable_mode = true;
    inputs.training_error = empirical_risk(spec, out.f_hat, ds);
    audit.bound = excess_risk_bound(inputs);
    return audit;
  }

  audit.has_oracle = true;
  const auto pilots = pilot_errors(out, oracle->f_star, spec, r, cls, settings.sup);
  audit.pilot_diamond = pilots.first;
  audit.pilot_sharp = pilots.second;
  audit.empirical_excess = empirical_excess_risk(out.f_hat, oracle->f_star, ds, spec);
  audit.bias_norm = oracle->well_specified
                        ? 0.0
                        : empirical_norm(oracle->f_dagger, oracle->f_star, ds);
  inputs.observable_mode = false;
  inputs.empirical_excess = audit.empirical_excess;
  inputs.pilot_diamond = audit.pilot_diamond;
  inputs.pilot_sharp = audit.pilot_sharp;
  inputs.bias_norm = audit.bias_norm;
  inputs.well_specified = oracle->well_specified;
  audit.bound = excess_risk_bound(inputs);

  const McEstimate truth = true_excess_risk(out.f_hat, oracle->f_star, spec, oracle->noise, ds,
                                            settings.mc_samples, derive_seed(seed, kTruthStream));
  audit.truth = truth.value;
  audit.truth_std_error = truth.std_error;
  audit.covered = audit.bound.total_bound >= audit.truth;

  // Distance to the best-in-class map, compared against the direct and
  // scale-tuned radius bounds at the radius actually realized.
  audit.rhat = empirical_norm(out.f_hat, oracle->f_dagger, ds);
  const double W2rh = process_W(out, 2.0 * audit.rhat, cls, settings.sup);
  const double T2rh = process_T(out, 2.0 * audit.rhat, cls, settings.sup);
  const auto pilots_rh = pilot_errors(out, oracle->f_star, spec, audit.rhat, cls, settings.sup);
  audit.pilot_radius_rhat = 2.0 * audit.rhat;
  audit.bound_rhat_direct =
      radius_bound_direct(W2rh, T2rh, std::max(0.0, pilots_rh.first),
                          std::max(0.0, pilots_rh.second), alpha, settings.sigma, settings.t,
                          ds.n(), ds.d());
  if (out.r_diamond > 0.0 && out.r_sharp > 0.0) {
    audit.bound_rhat_scale_tuned = radius_bound_scale_tuned(
        out.r_diamond, out.r_sharp, process_W(out, 2.0 * out.r_diamond, cls, settings.sup),
        process_T(out, 2.0 * out.r_sharp, cls, settings.sup),
        std::max(0.0, pilots_rh.first), std::max(0.0, pilots_rh.second), alpha, settings.sigma,
        settings.t, ds.n(), ds.d());
  }
  audit.rhat_covered = audit.rhat <= audit.bound_rhat_direct;

  if (settings.compute_symmetrized) {
    audit.symmetrized =
        symmetrized_processes(out, oracle->f_star, oracle->f_dagger, oracle->noise, spec, cls,
                              std::max(r, audit.rhat), derive_seed(seed, kSymStream));
  }
  return audit;
}

CoverageReport coverage_experiment(const Scenario& scenario, int reps, double t,
                                   const RhoPolicy& policy, std::uint64_t seed,
                                   const PipelineSettings& base_settings, int threads) {
  require(reps >= 1, "coverage experiment needs at least one replication");
  CoverageReport report;
  report.reps = reps;
  report.t = t;
  report.floor_thm1 = 1.0 - 6.0 * std::exp(-t * t);
  report.floor_thm2 = 1.0 - 2.0 * std::exp(-t * t);
  report.rows.resize(reps);

  const auto design = generate_design(scenario.design, scenario.n, scenario.p,
                                      derive_seed(seed, 11));

  PipelineSettings settings = base_settings;
  settings.t = t;
  settings.sigma = scenario.noise.sigma;
  settings.mc_samples = scenario.mc_samples;

  auto run_rep = [&](int rep) {
    CoverageRow& row = report.rows[rep];
    row.rep = rep;
    row.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(rep));
    try {
      const FixedDesignDataset ds =
          sample_outcomes(design, scenario.f_star, scenario.noise, scenario.loss,
                          derive_seed(row.seed, 13));
      OracleContext oracle;
      oracle.f_star = scenario.f_star;
      oracle.noise = scenario.noise;
      oracle.well_specified = scenario.well_specified;
      oracle.f_dagger = best_in_class(scenario.cls, scenario.noise, scenario.f_star, ds,
                                      scenario.loss, scenario.mc_samples,
                                      scenario.well_specified, derive_seed(row.seed, kDaggerStream));

      PipelineSettings rep_settings = settings;
      if (policy.kind == RhoPolicy::Kind::fixed_scales) {
        rep_settings.fixed_rho1 = policy.rho1;
        rep_settings.fixed_rho2 = policy.rho2;
      }
      const AuditOutcome audit = run_single_audit(scenario.loss, scenario.trainer, scenario.cls,
                                                  ds, rep_settings, row.seed, &oracle);
      row.r_fixed_point = audit.fixed_point.r;
      row.rho1 = audit.out.rho1;
      row.rho2 = audit.out.rho2;
      row.opt_diamond = audit.opt_diamond;
      row.opt_sharp = audit.opt_sharp;
      row.B_diamond = audit.pilot_diamond;
      row.B_sharp = audit.pilot_sharp;
      row.bound_thm1 = audit.bound.total_bound;
      row.truth = audit.truth;
      row.covered = audit.covered;
      row.lemma1_ok = audit.lemma1_ok;
      row.rhat = audit.rhat;
      row.bound_thm2 = audit.bound_rhat_direct;
      row.rhat_covered = audit.rhat_covered;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  };

  int worker_count = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  worker_count = std::max(1, std::min(worker_count, reps));
  if (worker_count == 1) {
    for (int rep = 0; rep < reps; ++rep) run_rep(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (int w = 0; w < worker_count; ++w) {
      pool.emplace_back([&]() {
        for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1)) run_rep(rep);
      });
    }
    for (auto& th : pool) th.join();
  }

  int covered = 0, rhat_covered = 0, lemma_ok = 0;
  for (const CoverageRow& row : report.rows) {
    if (row.failed) {
      ++report.failures;
      continue;
    }
    covered += row.covered ? 1 : 0;
    rhat_covered += row.rhat_covered ? 1 : 0;
    lemma_ok += row.lemma1_ok ? 1 : 0;
  }
  report.coverage_thm1 = static_cast<double>(covered) / reps;
  report.coverage_thm2 = static_cast<double>(rhat_covered) / reps;
  report.lemma1_rate = static_cast<double>(lemma_ok) / reps;
  return report;
}

std::string coverage_csv(const CoverageReport& report) {
  std::ostringstream os;
  os << "rep,seed,r_fixed_point,rho1,rho2,opt_diamond,opt_sharp,B_diamond,B_sharp,"
        "bound_thm1,truth,covered,lemma1_ok,rhat,bound_thm2,rhat_covered\n";
  char buf[512];
  for (const CoverageRow& row : report.rows) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g,"
                  "%.17g,%d\n",
                  row.rep, static_cast<unsigned long long>(row.seed), row.r_fixed_point,
                  row.rho1, row.rho2, row.opt_diamond, row.opt_sharp, row.B_diamond, row.B_sharp,
                  row.bound_thm1, row.truth, row.covered ? 1 : 0, row.lemma1_ok ? 1 : 0,
                  row.rhat, row.bound_thm2, row.rhat_covered ? 1 : 0);
    os << buf;
  }
  return os.str();
}

}  // namespace riskwild
