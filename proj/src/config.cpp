#include "riskwild/config.hpp"

#include <cmath>

#include "riskwild/io.hpp"

namespace riskwild {

namespace {

void check_keys(const nlohmann::json& j, const char* section,
                std::initializer_list<const char*> allowed) {
  if (j.is_null()) return;
  if (!j.is_object()) throw ConfigError(std::string("section '") + section + "' must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(std::string("unknown key '") + item.key() + "' in section '" + section +
                        "'");
    }
  }
}

Mat json_matrix(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ConfigError(std::string(what) + " must be a matrix (array of arrays)");
  }
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols) {
      throw ConfigError(std::string(what) + " rows have inconsistent lengths");
    }
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Vec json_vector(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
  Vec v(static_cast<int>(j.size()));
  for (int k = 0; k < v.size(); ++k) v(k) = j[k].get<double>();
  return v;
}

}  // namespace

int config_int(const nlohmann::json& section, const char* key, int fallback) {
  if (section.is_object() && section.contains(key)) return section[key].get<int>();
  return fallback;
}

double config_double(const nlohmann::json& section, const char* key, double fallback) {
  if (section.is_object() && section.contains(key)) return section[key].get<double>();
  return fallback;
}

std::string config_string(const nlohmann::json& section, const char* key,
                          const std::string& fallback) {
  if (section.is_object() && section.contains(key)) return section[key].get<std::string>();
  return fallback;
}

RunConfig RunConfig::defaults() { return from_json(nlohmann::json::object()); }

RunConfig RunConfig::from_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "<root>",
             {"seed", "out", "mode", "dataset", "loss", "trainer", "class", "dims", "f_star",
              "noise", "design", "solver", "experiment", "check", "well_specified"});
  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  cfg.out_dir = j.value("out", cfg.out_dir);
  cfg.mode = j.value("mode", cfg.mode);
  if (cfg.mode != "oracle" && cfg.mode != "observable") {
    throw ConfigError("mode must be 'oracle' or 'observable'");
  }
  if (j.contains("dataset")) {
    check_keys(j["dataset"], "dataset", {"path"});
    cfg.dataset_path = j["dataset"].value("path", std::string());
    if (cfg.dataset_path->empty()) throw ConfigError("dataset.path must be a file path");
  }
  cfg.well_specified = j.value("well_specified", true);

  cfg.loss = j.value("loss", nlohmann::json::object());
  check_keys(cfg.loss, "loss", {"name", "log_partition", "mu", "A", "b"});
  cfg.trainer = j.value("trainer", nlohmann::json::object());
  check_keys(cfg.trainer, "trainer",
             {"name", "lambda", "tol", "max_iter", "widths", "epochs", "step", "seed"});
  cfg.cls = j.value("class", nlohmann::json::object());
  check_keys(cfg.cls, "class", {"kind", "features"});
  cfg.dims = j.value("dims", nlohmann::json::object());
  check_keys(cfg.dims, "dims", {"n", "p", "d"});
  cfg.f_star = j.value("f_star", nlohmann::json::object());
  check_keys(cfg.f_star, "f_star", {"kind", "coeffs"});
  cfg.noise = j.value("noise", nlohmann::json::object());
  check_keys(cfg.noise, "noise", {"kind", "sigma", "df"});
  cfg.design = j.value("design", nlohmann::json::object());
  check_keys(cfg.design, "design", {"kind"});
  cfg.solver = j.value("solver", nlohmann::json::object());
  check_keys(cfg.solver, "solver", {"tol", "max_iter", "method"});
  cfg.experiment = j.value("experiment", nlohmann::json::object());
  check_keys(cfg.experiment, "experiment",
             {"reps", "t", "rho_policy", "rho1", "rho2", "mc_samples", "r_max", "fp_tol",
              "rho_bracket", "rho_tol", "rho_max_evals", "threads", "symmetrized",
              "target_radius"});
  cfg.check = j.value("check", nlohmann::json::object());
  check_keys(cfg.check, "check", {"trials", "scale", "slack"});
  return cfg;
}

LossSpec make_loss(const RunConfig& cfg) {
  const std::string name = config_string(cfg.loss, "name", "squared");
  if (name == "squared") return squared_loss();
  if (name == "expfam") {
    const LogPartition lp = log_partition(config_string(cfg.loss, "log_partition", "gaussian"));
    return expfam_loss(lp, config_double(cfg.loss, "mu", 1.0));
  }
  if (name == "quadform") {
    if (!cfg.loss.contains("A")) throw ConfigError("quadform loss needs a matrix 'A'");
    const Mat A = json_matrix(cfg.loss["A"], "loss.A");
    const Vec b = cfg.loss.contains("b") ? json_vector(cfg.loss["b"], "loss.b")
                                         : Vec(Vec::Zero(A.rows()));
    return quadform_loss(A, b);
  }
  throw ConfigError("unknown loss '" + name + "' (expected squared | expfam | quadform)");
}

FunctionClass make_class(const RunConfig& cfg, int p, int d) {
  const std::string kind = config_string(cfg.cls, "kind", "linear-feature");
  if (kind == "unconstrained") return FunctionClass::unconstrained(d);
  if (kind != "linear-feature") {
    throw ConfigError("class.kind must be 'unconstrained' or 'linear-feature'");
  }
  const std::string features = config_string(cfg.cls, "features", "identity");
  if (features == "identity") return FunctionClass::identity_features(p, d);
  if (features == "affine") return FunctionClass::affine_features(p, d);
  throw ConfigError("class.features must be 'identity' or 'affine'");
}

Trainer make_trainer(const RunConfig& cfg, const LossSpec& spec, const FunctionClass& cls) {
  const std::string name = config_string(cfg.trainer, "name", "ridge");
  if (name == "ridge") {
    return ridge_closed_form_trainer(config_double(cfg.trainer, "lambda", 0.0), cls);
  }
  if (name == "convex-erm") {
    return generic_convex_erm_trainer(spec, cls, config_double(cfg.trainer, "tol", 1e-8),
                                      config_int(cfg.trainer, "max_iter", 50000));
  }
  if (name == "mlp") {
    std::vector<int> widths;
    if (cfg.trainer.contains("widths")) {
      for (const auto& w : cfg.trainer["widths"]) widths.push_back(w.get<int>());
    }
    if (widths.empty()) throw ConfigError("mlp trainer needs 'widths'");
    return opaque_mlp_trainer(spec, widths,
                              static_cast<std::uint64_t>(config_int(cfg.trainer, "seed", 7)),
                              config_int(cfg.trainer, "epochs", 500),
                              config_double(cfg.trainer, "step", 0.05));
  }
  throw ConfigError("unknown trainer '" + name + "' (expected ridge | convex-erm | mlp)");
}

NoiseModel make_noise(const RunConfig& cfg) {
  NoiseModel noise;
  const std::string kind = config_string(cfg.noise, "kind", "isotropic-gaussian");
  if (kind == "isotropic-gaussian") {
    noise.kind = NoiseModel::Kind::isotropic_gaussian;
  } else if (kind == "isotropic-student-t") {
    noise.kind = NoiseModel::Kind::isotropic_student_t;
  } else {
    throw ConfigError("noise.kind must be isotropic-gaussian | isotropic-student-t");
  }
  noise.sigma = config_double(cfg.noise, "sigma", 1.0);
  if (noise.sigma < 0.0) throw ConfigError("noise.sigma must be nonnegative");
  noise.df = config_double(cfg.noise, "df", 5.0);
  return noise;
}

Predictor make_f_star(const RunConfig& cfg, int p, int d) {
  const std::string kind = config_string(cfg.f_star, "kind", "linear");
  Mat coeffs;
  if (cfg.f_star.contains("coeffs")) {
    coeffs = json_matrix(cfg.f_star["coeffs"], "f_star.coeffs");
  } else {
    coeffs = Mat::Ones(d, p);
  }
  Predictor f;
  f.class_tag = "oracle";
  if (kind == "linear") {
    if (coeffs.rows() != d || coeffs.cols() != p) {
      throw ConfigError("f_star.coeffs must be d x p for kind 'linear'");
    }
    const Mat theta = coeffs;
    f.params = theta;
    f.evaluate = [theta](const Vec& x) -> Vec { return theta * x; };
    return f;
  }
  if (kind == "sine") {
    if (coeffs.rows() != d || coeffs.cols() != p) {
      throw ConfigError("f_star.coeffs must be d x p for kind 'sine'");
    }
    const Mat theta = coeffs;
    f.evaluate = [theta](const Vec& x) -> Vec {
      Vec out = theta * x;
      for (int k = 0; k < out.size(); ++k) out(k) = std::sin(out(k));
      return out;
    };
    return f;
  }
  throw ConfigError("f_star.kind must be 'linear' or 'sine'");
}

Scenario make_scenario(const RunConfig& cfg) {
  Scenario sc;
  sc.n = config_int(cfg.dims, "n", 60);
  sc.p = config_int(cfg.dims, "p", 2);
  sc.d = config_int(cfg.dims, "d", 1);
  if (sc.n < 1 || sc.p < 1 || sc.d < 1) throw ConfigError("dims must all be >= 1");
  const std::string design = config_string(cfg.design, "kind", "uniform-cube");
  if (design == "uniform-cube") {
    sc.design = DesignRule::uniform_cube;
  } else if (design == "grid") {
    sc.design = DesignRule::grid;
  } else {
    throw ConfigError("design.kind must be 'uniform-cube' or 'grid'");
  }
  sc.loss = make_loss(cfg);
  sc.cls = make_class(cfg, sc.p, sc.d);
  sc.trainer = make_trainer(cfg, sc.loss, sc.cls);
  sc.noise = make_noise(cfg);
  sc.f_star = make_f_star(cfg, sc.p, sc.d);
  sc.well_specified = cfg.well_specified;
  sc.mc_samples = config_int(cfg.experiment, "mc_samples", 2000);
  return sc;
}

SolveOptions make_solve_options(const RunConfig& cfg) {
  SolveOptions opts;
  opts.tol = config_double(cfg.solver, "tol", 1e-8);
  opts.max_iter = config_int(cfg.solver, "max_iter", 100);
  const std::string method = config_string(cfg.solver, "method", "auto");
  if (method == "auto") {
    opts.method = SolveMethod::automatic;
  } else if (method == "newton") {
    opts.method = SolveMethod::newton;
  } else if (method == "ppa") {
    opts.method = SolveMethod::ppa;
  } else {
    throw ConfigError("solver.method must be auto | newton | ppa");
  }
  return opts;
}

PipelineSettings make_settings(const RunConfig& cfg) {
  PipelineSettings settings;
  settings.t = config_double(cfg.experiment, "t", 2.0);
  if (settings.t <= 0.0) throw ConfigError("experiment.t must be positive");
  settings.sigma = config_double(cfg.noise, "sigma", 1.0);
  settings.solve = make_solve_options(cfg);
  settings.fp_r_max = config_double(cfg.experiment, "r_max", 1e6);
  settings.fp_tol = config_double(cfg.experiment, "fp_tol", 1e-8);
  if (cfg.experiment.contains("rho_bracket")) {
    const Vec b = json_vector(cfg.experiment["rho_bracket"], "experiment.rho_bracket");
    if (b.size() != 2 || b(0) <= 0.0 || b(1) <= b(0)) {
      throw ConfigError("experiment.rho_bracket must be [lo, hi] with 0 < lo < hi");
    }
    settings.rho_bracket = {b(0), b(1)};
  }
  settings.rho_tol = config_double(cfg.experiment, "rho_tol", 1e-6);
  settings.rho_max_evals = config_int(cfg.experiment, "rho_max_evals", 200);
  settings.mc_samples = config_int(cfg.experiment, "mc_samples", 2000);
  settings.compute_symmetrized = cfg.experiment.value("symmetrized", false);
  const std::string policy = config_string(cfg.experiment, "rho_policy", "fixed-point");
  if (policy == "fixed") {
    settings.fixed_rho1 = config_double(cfg.experiment, "rho1", 0.5);
    settings.fixed_rho2 = config_double(cfg.experiment, "rho2", 0.5);
  }
  if (cfg.experiment.contains("target_radius")) {
    settings.target_radius = cfg.experiment["target_radius"].get<double>();
    if (*settings.target_radius < 0.0) throw ConfigError("experiment.target_radius must be >= 0");
  }
  return settings;
}

RhoPolicy make_rho_policy(const RunConfig& cfg) {
  RhoPolicy policy;
  const std::string kind = config_string(cfg.experiment, "rho_policy", "fixed-point");
  if (kind == "fixed-point") {
    policy.kind = RhoPolicy::Kind::fixed_point;
  } else if (kind == "fixed") {
    policy.kind = RhoPolicy::Kind::fixed_scales;
    policy.rho1 = config_double(cfg.experiment, "rho1", 0.5);
    policy.rho2 = config_double(cfg.experiment, "rho2", 0.5);
  } else {
    throw ConfigError("experiment.rho_policy must be 'fixed-point' or 'fixed'");
  }
  return policy;
}

}  // namespace riskwild
