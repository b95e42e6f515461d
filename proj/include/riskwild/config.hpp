#pragma once

#include <optional>
#include <string>

#include "riskwild/oracle.hpp"
#include "riskwild/pipeline.hpp"

#include "json.hpp"

namespace riskwild {

// Parsed and validated run configuration. Every field has a default; unknown
// keys anywhere in the file are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string mode = "oracle";  // "oracle" | "observable"
  std::optional<std::string> dataset_path;

  nlohmann::json loss;     // validated sections kept for builders
  nlohmann::json trainer;
  nlohmann::json cls;
  nlohmann::json dims;
  nlohmann::json f_star;
  nlohmann::json noise;
  nlohmann::json design;
  nlohmann::json solver;
  nlohmann::json experiment;
  nlohmann::json check;
  bool well_specified = true;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  static RunConfig defaults();
};

LossSpec make_loss(const RunConfig& cfg);
FunctionClass make_class(const RunConfig& cfg, int p, int d);
Trainer make_trainer(const RunConfig& cfg, const LossSpec& spec, const FunctionClass& cls);
NoiseModel make_noise(const RunConfig& cfg);
Predictor make_f_star(const RunConfig& cfg, int p, int d);
Scenario make_scenario(const RunConfig& cfg);
PipelineSettings make_settings(const RunConfig& cfg);
SolveOptions make_solve_options(const RunConfig& cfg);
RhoPolicy make_rho_policy(const RunConfig& cfg);

int config_int(const nlohmann::json& section, const char* key, int fallback);
double config_double(const nlohmann::json& section, const char* key, double fallback);
std::string config_string(const nlohmann::json& section, const char* key,
                          const std::string& fallback);

}  // namespace riskwild
