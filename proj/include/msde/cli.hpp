#pragma once

// Config-driven front end: JSON run configs, gate validation and experiment
// dispatch. Used by the `msde` executable.

#include "msde/experiments.hpp"
#include "msde/fem_plaplace.hpp"
#include "msde/models.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace msde {

inline constexpr const char* kVersion = "0.1.0";

namespace cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Rate, EtaRate, Diagnostics, Gap, WienerCheck, Trajectory };

std::string to_string(ExperimentKind kind);

struct FemConfig {
  double L = 1.0;
  Index elements = 16;
  double p_lap = 3.0;
  std::string diffusion = "zero";
  std::string shape = "sin";
  std::string initial = "sin";
};

struct ProblemConfig {
  std::string model;
  Index dim = 1;
  Index noise_dim = 1;
  double T = 1.0;
  std::optional<Matrix> A;
  std::string b_kind = "zero";
  double b_scale = 0.0;
  std::string g_kind = "additive";
  Matrix g0;
  double g_sigma = 0.0;
  std::string x0_kind = "fixed";
  Vector x0_value;
  double x0_std = 0.0;
  std::optional<FemConfig> fem;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Rate;
  std::vector<double> k_levels;
  std::optional<double> k_ref;
  std::optional<double> k;  ///< wiener-check and trajectory
  Index paths = 1000;
  std::uint64_t seed = 0;
  Index fine_factor = 32;
  Quadrature quadrature = Quadrature::Simpson;
  Matrix g0;  ///< wiener-check
  Index path_index = 0;  ///< trajectory
  bool dump_increments = false;  ///< trajectory
};

struct OutputConfig {
  std::string directory = ".";
  std::string prefix;
};

struct RunConfig {
  ProblemConfig problem;
  ExperimentConfig experiment;
  StepSolverConfig solver;
  OutputConfig output;
  nlohmann::json source;  ///< the parsed document, echoed into metadata
};

/// Parses and checks a config document. Unknown keys are rejected; errors name
/// the offending key path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Problem instance described by the config.
ProblemSpec build_problem(const ProblemConfig& cfg);

/// Step sizes the experiment will simulate at (levels plus k_ref or k).
std::vector<double> simulated_steps(const RunConfig& cfg);

/// Checks Solvability, then the regime the experiment needs, at every
/// simulated step size. Throws GateError on the first violation; returns all
/// checks otherwise.
std::vector<GateCheck> validate(const RunConfig& cfg);

struct RunOptions {
  unsigned threads = 1;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
};

struct RunResult {
  std::filesystem::path csv;
  std::filesystem::path meta;
  nlohmann::json metadata;
};

RunResult run(const RunConfig& cfg, const RunOptions& opts);

/// Seed from the MSDE_SEED environment variable, if set.
std::optional<std::uint64_t> seed_from_env();

std::vector<ModelInfo> list_models();

nlohmann::json gate_to_json(const GateCheck& check);

}  // namespace cli
}  // namespace msde
