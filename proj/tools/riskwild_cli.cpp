#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "riskwild/config.hpp"
#include "riskwild/io.hpp"
#include "riskwild/pipeline.hpp"

namespace {

using namespace riskwild;

struct GlobalFlags {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> mode;
};

RunConfig resolve_config(const GlobalFlags& flags) {
  RunConfig cfg = flags.config_path ? RunConfig::from_file(*flags.config_path)
                                    : RunConfig::defaults();
  // Seed precedence: --seed, then config, then RISKWILD_SEED, then default.
  if (flags.seed) {
    cfg.seed = *flags.seed;
  } else if (!(flags.config_path &&
               nlohmann::json::parse(read_text_file(*flags.config_path)).contains("seed"))) {
    if (const char* env = std::getenv("RISKWILD_SEED")) {
      cfg.seed = std::strtoull(env, nullptr, 10);
    }
  }
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (flags.mode) {
    if (*flags.mode != "oracle" && *flags.mode != "observable") {
      throw ConfigError("mode must be 'oracle' or 'observable'");
    }
    cfg.mode = *flags.mode;
  }
  return cfg;
}

nlohmann::json tune_to_json(const RhoTuneResult& tune) {
  nlohmann::json j;
  j["rho"] = tune.rho;
  j["achieved_radius"] = tune.achieved;
  j["converged"] = tune.converged;
  return j;
}

nlohmann::json solves_to_json(const std::vector<SolveReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rep : reports) {
    arr.push_back({{"residual", rep.residual_norm},
                   {"iterations", rep.iterations},
                   {"method", rep.method}});
  }
  return arr;
}

int cmd_check_loss(const RunConfig& cfg) {
  const LossSpec spec = make_loss(cfg);
  const int d = config_int(cfg.dims, "d", 2);
  const int trials = config_int(cfg.check, "trials", 1000);
  const double scale = config_double(cfg.check, "scale", 2.0);
  Assumption1Report report =
      check_assumption1(spec, gaussian_triple_sampler(d, scale, derive_seed(cfg.seed, 5)), trials);
  report.slack = config_double(cfg.check, "slack", 1e-9);

  nlohmann::json j;
  j["loss"] = spec.name;
  j["beta"] = spec.beta;
  j["mu"] = spec.mu;
  j["trials"] = report.trials;
  j["smoothness_violation"] = report.smoothness_violation;
  j["convexity_violation"] = report.convexity_violation;
  j["monotonicity_violation"] = report.monotonicity_violation;
  j["coercivity_increase"] = report.coercivity_increase;
  j["coercivity_tail_slope"] = report.coercivity_tail_slope;
  j["slack"] = report.slack;
  j["pass"] = report.pass();
  atomic_write_text(cfg.out_dir + "/check_loss.json", j.dump(2) + "\n");
  if (!report.pass()) {
    std::cerr << "loss check failed; see " << cfg.out_dir << "/check_loss.json\n";
    return 1;
  }
  std::cout << "loss check passed for '" << spec.name << "'\n";
  return 0;
}

// Shared by audit and radius: run the scenario (or dataset) pipeline once.
struct AuditRun {
  AuditOutcome audit;
  LossSpec spec;
  FunctionClass cls;
  FixedDesignDataset ds;
  bool oracle_mode = false;
};

AuditRun run_from_config(const RunConfig& cfg) {
  AuditRun run;
  run.spec = make_loss(cfg);
  PipelineSettings settings = make_settings(cfg);

  if (cfg.dataset_path) {
    run.ds = load_dataset(*cfg.dataset_path);
    run.cls = make_class(cfg, run.ds.p(), run.ds.d());
    const Trainer trainer = make_trainer(cfg, run.spec, run.cls);
    run.oracle_mode = false;  // no ground truth available for file datasets
    run.audit = run_single_audit(run.spec, trainer, run.cls, run.ds, settings, cfg.seed, nullptr);
    return run;
  }

  const Scenario scenario = make_scenario(cfg);
  run.cls = scenario.cls;
  const auto gen = gen_fixed_design(scenario, cfg.seed);
  run.ds = gen.first;
  run.oracle_mode = cfg.mode == "oracle";
  if (!run.oracle_mode) {
    run.audit = run_single_audit(scenario.loss, scenario.trainer, scenario.cls, run.ds, settings,
                                 cfg.seed, nullptr);
    run.spec = scenario.loss;
    return run;
  }
  OracleContext oracle;
  oracle.f_star = scenario.f_star;
  oracle.noise = scenario.noise;
  oracle.well_specified = scenario.well_specified;
  oracle.f_dagger =
      best_in_class(scenario.cls, scenario.noise, scenario.f_star, run.ds, scenario.loss,
                    scenario.mc_samples, scenario.well_specified, derive_seed(cfg.seed, 223));
  run.audit = run_single_audit(scenario.loss, scenario.trainer, scenario.cls, run.ds, settings,
                               cfg.seed, &oracle);
  run.spec = scenario.loss;
  return run;
}

nlohmann::json audit_to_json(const AuditRun& run, const RunConfig& cfg) {
  const AuditOutcome& audit = run.audit;
  nlohmann::json j;
  j["seed"] = audit.seed;
  j["mode"] = run.oracle_mode ? "oracle" : "observable";
  j["rho1"] = audit.out.rho1;
  j["rho2"] = audit.out.rho2;
  j["r_diamond"] = audit.out.r_diamond;
  j["r_sharp"] = audit.out.r_sharp;
  j["r_fixed_point"] = audit.fixed_point.r;
  j["r_fixed_point_saturated"] = audit.fixed_point.saturated;
  j["tune_diamond"] = tune_to_json(audit.tune_diamond);
  j["tune_sharp"] = tune_to_json(audit.tune_sharp);
  j["trainer_stationarity"] = {audit.out.trainer_stationarity[0],
                               audit.out.trainer_stationarity[1],
                               audit.out.trainer_stationarity[2]};
  j["W_at_r_diamond"] = audit.W_at_r_diamond;
  j["T_at_r_sharp"] = audit.T_at_r_sharp;
  j["opt_diamond"] = audit.opt_diamond;
  j["opt_sharp"] = audit.opt_sharp;
  j["lemma1_ok"] = audit.lemma1_ok;
  j["lemma1_slack"] = audit.lemma1_slack;
  j["bound"] = audit.bound.to_json();
  j["wild_solves"] = {{"diamond", solves_to_json(audit.out.solves_diamond)},
                      {"sharp", solves_to_json(audit.out.solves_sharp)}};
  if (audit.has_oracle) {
    j["truth"] = audit.truth;
    j["truth_std_error"] = audit.truth_std_error;
    j["covered"] = audit.covered;
    j["empirical_excess"] = audit.empirical_excess;
    j["pilot_diamond"] = audit.pilot_diamond;
    j["pilot_sharp"] = audit.pilot_sharp;
    j["bias_norm"] = audit.bias_norm;
    j["rhat"] = audit.rhat;
    j["bound_thm2"] = audit.bound_rhat_direct;
    j["rhat_covered"] = audit.rhat_covered;
  }
  j["n"] = run.ds.n();
  j["p"] = run.ds.p();
  j["d"] = run.ds.d();
  j["loss"] = run.spec.name;
  j["config_seed"] = cfg.seed;
  return j;
}

int cmd_audit(const RunConfig& cfg) {
  const AuditRun run = run_from_config(cfg);
  atomic_write_text(cfg.out_dir + "/d0.csv", dataset_to_csv(run.ds));
  atomic_write_text(cfg.out_dir + "/d_diamond.csv", dataset_to_csv(run.audit.out.d_diamond));
  atomic_write_text(cfg.out_dir + "/d_sharp.csv", dataset_to_csv(run.audit.out.d_sharp));
  atomic_write_text(cfg.out_dir + "/audit.json", audit_to_json(run, cfg).dump(2) + "\n");

  // One-line summary row for sweep aggregation.
  std::string row = "seed,n,d,loss,r_fixed_point,rho1,rho2,opt_diamond,opt_sharp,total_bound\n";
  row += std::to_string(cfg.seed) + "," + std::to_string(run.ds.n()) + "," +
         std::to_string(run.ds.d()) + "," + run.spec.name + "," +
         format_double(run.audit.fixed_point.r) + "," + format_double(run.audit.out.rho1) + "," +
         format_double(run.audit.out.rho2) + "," + format_double(run.audit.opt_diamond) + "," +
         format_double(run.audit.opt_sharp) + "," +
         format_double(run.audit.bound.total_bound) + "\n";
  atomic_write_text(cfg.out_dir + "/summary.csv", row);
  std::cout << "audit written to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_tune_rho(const RunConfig& cfg) {
  const AuditRun run = run_from_config(cfg);
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["target_radius"] = 2.0 * run.audit.fixed_point.r;
  j["diamond"] = tune_to_json(run.audit.tune_diamond);
  j["sharp"] = tune_to_json(run.audit.tune_sharp);
  atomic_write_text(cfg.out_dir + "/tune_rho.json", j.dump(2) + "\n");

  std::string table = "side,rho,achieved_radius\n";
  for (const auto& [rho, radius] : run.audit.tune_diamond.scan) {
    table += "diamond," + format_double(rho) + "," + format_double(radius) + "\n";
  }
  for (const auto& [rho, radius] : run.audit.tune_sharp.scan) {
    table += "sharp," + format_double(rho) + "," + format_double(radius) + "\n";
  }
  atomic_write_text(cfg.out_dir + "/tune_rho_scan.csv", table);
  if (!run.audit.tune_diamond.converged || !run.audit.tune_sharp.converged) {
    std::cerr << "rho tuning did not reach the target radius; see " << cfg.out_dir
              << "/tune_rho_scan.csv\n";
    return 1;
  }
  std::cout << "rho tuning written to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_radius(const RunConfig& cfg) {
  const AuditRun run = run_from_config(cfg);
  const AuditOutcome& audit = run.audit;
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["r_fixed_point"] = audit.fixed_point.r;
  j["r_fixed_point_saturated"] = audit.fixed_point.saturated;
  j["components"] = {{"W_at_r_diamond", audit.W_at_r_diamond},
                     {"T_at_r_sharp", audit.T_at_r_sharp},
                     {"r_diamond", audit.out.r_diamond},
                     {"r_sharp", audit.out.r_sharp}};
  if (audit.has_oracle) {
    j["rhat"] = audit.rhat;
    j["r_direct"] = audit.bound_rhat_direct;
    j["r_scale_tuned_full"] = audit.bound_rhat_scale_tuned.full;
    j["r_scale_tuned_simplified"] = audit.bound_rhat_scale_tuned.simplified;
    j["pilot_radius"] = audit.pilot_radius_rhat;
    j["pilot_diamond"] = audit.pilot_diamond;
    j["pilot_sharp"] = audit.pilot_sharp;
    j["well_specified"] = cfg.well_specified;
  } else {
    j["well_specified"] = false;
    j["note"] = "ground-truth radius quantities need oracle mode with a scenario";
  }
  atomic_write_text(cfg.out_dir + "/radius.json", j.dump(2) + "\n");
  std::cout << "radius report written to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_coverage(const RunConfig& cfg) {
  if (cfg.dataset_path) throw ConfigError("coverage runs need a scenario, not a dataset file");
  const Scenario scenario = make_scenario(cfg);
  const int reps = config_int(cfg.experiment, "reps", 50);
  const double t = config_double(cfg.experiment, "t", 2.0);
  const int threads = config_int(cfg.experiment, "threads", 0);
  const RhoPolicy policy = make_rho_policy(cfg);
  PipelineSettings settings = make_settings(cfg);

  const CoverageReport report =
      coverage_experiment(scenario, reps, t, policy, cfg.seed, settings, threads);

  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["reps"] = report.reps;
  j["t"] = report.t;
  j["coverage_thm1"] = report.coverage_thm1;
  j["coverage_thm2"] = report.coverage_thm2;
  j["lemma1_rate"] = report.lemma1_rate;
  j["floor_thm1"] = report.floor_thm1;
  j["floor_thm2"] = report.floor_thm2;
  j["failures"] = report.failures;
  j["pass"] = report.pass();
  atomic_write_text(cfg.out_dir + "/coverage.json", j.dump(2) + "\n");
  atomic_write_text(cfg.out_dir + "/coverage_reps.csv", coverage_csv(report));

  std::cout << "coverage " << report.coverage_thm1 << " (floor " << report.floor_thm1
            << "), rhat coverage " << report.coverage_thm2 << " (floor " << report.floor_thm2
            << "), lemma1 rate " << report.lemma1_rate << ", failures " << report.failures
            << "\n";
  return report.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"doubly wild refitting: excess-risk certificates for black-box ERM"};
  app.require_subcommand(1);

  GlobalFlags flags;
  std::string config_path, out_dir, mode;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--mode", mode, "oracle | observable");
  };

  CLI::App* check = app.add_subcommand("check-loss", "verify loss regularity numerically");
  CLI::App* audit = app.add_subcommand("audit", "single refitting audit with bound assembly");
  CLI::App* tune = app.add_subcommand("tune-rho", "tune noise scales to a target radius");
  CLI::App* radius = app.add_subcommand("radius", "data-driven radius bounds");
  CLI::App* coverage = app.add_subcommand("coverage", "Monte Carlo coverage experiment");
  for (CLI::App* sub : {check, audit, tune, radius, coverage}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    for (CLI::App* sub : {check, audit, tune, radius, coverage}) {
      if (!sub->parsed()) continue;
      if (sub->count("--config")) flags.config_path = config_path;
      if (sub->count("--seed")) flags.seed = seed;
      if (sub->count("--out")) flags.out_dir = out_dir;
      if (sub->count("--mode")) flags.mode = mode;
    }
    const RunConfig cfg = resolve_config(flags);
    if (check->parsed()) return cmd_check_loss(cfg);
    if (audit->parsed()) return cmd_audit(cfg);
    if (tune->parsed()) return cmd_tune_rho(cfg);
    if (radius->parsed()) return cmd_radius(cfg);
    if (coverage->parsed()) return cmd_coverage(cfg);
    return 2;
  } catch (const riskwild::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
