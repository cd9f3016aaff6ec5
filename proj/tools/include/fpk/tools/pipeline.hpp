#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/coefficients.hpp"
#include "fpk/ensemble.hpp"
#include "fpk/fpke.hpp"
#include "fpk/space.hpp"
#include "fpk/test_functions.hpp"

namespace fpk::pipeline {

/// Pipeline stages. The numbers are stable and appear in exit codes.
enum class Stage : int {
  kProject = 1,
  kSolve = 2,
  kSimulate = 3,
  kConverge = 5,
  kResidual = 6,
  kMartingale = 7,
  kSuperposition = 8,
  kMass = 9,
};

std::string stage_name(Stage s);
/// Accepts stage names, "check-assumptions" and stage numbers.
Stage parse_stage(const std::string& text);
std::vector<Stage> parse_stage_list(const std::string& csv);
const std::vector<Stage>& all_stages();

struct Overrides {
  std::optional<std::uint64_t> seed;
  double tol_scale = 1.0;
  std::optional<std::vector<Stage>> stages;
  std::optional<std::filesystem::path> output;
  std::optional<std::filesystem::path> flow_file;
  std::optional<std::filesystem::path> ensemble_file;
};

struct Tolerances {
  double superposition = 2e-2;
  double residual = 5e-3;
  double martingale_z = 4.0;
  std::optional<double> convergence;  // default 3 / sqrt(M)
};

/// Validated run configuration (JSON schema documented in the README).
struct RunConfig {
  nlohmann::json source;
  std::string name;
  SpaceTriple triple = SpaceTriple::unit(1);
  nlohmann::json model;
  double horizon = 1.0;
  Vector x0;
  std::map<Stage, std::uint64_t> seeds;
  SimulationSpec simulation;
  nlohmann::json simulation_model;  // null: same as model
  nlohmann::json flow;
  FamilySpec family;
  nlohmann::json checks;
  nlohmann::json residual;
  nlohmann::json martingale;
  nlohmann::json convergence;
  nlohmann::json energy;
  std::vector<int> lyapunov_ks{1};
  Tolerances tol;
  bool write_ensemble = true;
  std::vector<Stage> stages;
  std::filesystem::path output = "out";

  std::uint64_t seed(Stage s) const;
  static RunConfig from_json(const nlohmann::json& j, const Overrides& ov = {});
  static RunConfig load(const std::filesystem::path& path, const Overrides& ov = {});
};

/// Model registry extended with the SNSE builder ({"name": "snse", "params": {...}}).
CoefficientModel build_model(const nlohmann::json& spec, double horizon);
NFunction build_gauge(const nlohmann::json& spec, const SpaceTriple& triple);
LyapunovData build_lyapunov(const nlohmann::json& spec, const SpaceTriple& triple);

struct StageOutcome {
  Stage stage;
  Verdict verdict = Verdict::kIndeterminate;
  std::string error;  // nonempty when the stage raised
  std::string report_file;
};

struct RunResult {
  int exit_code = 0;
  std::vector<StageOutcome> stages;
  nlohmann::json summary;
};

/// Exit codes: 0 success, 10 + s for a failed check at stage s, 20 + s for
/// an error raised in stage s, 2 for configuration errors.
inline constexpr int kConfigErrorExit = 2;

/// Runs the requested stages in order, writing reports into cfg.output.
/// Failed checks do not stop later stages; errors do.
RunResult run(const RunConfig& cfg, const Overrides& ov = {});

}  // namespace fpk::pipeline
