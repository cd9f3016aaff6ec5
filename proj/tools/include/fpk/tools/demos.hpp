#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

namespace fpk::pipeline {

struct DemoResult {
  int exit_code = 0;
  nlohmann::json report;
};

struct MkvOptions {
  std::optional<std::size_t> max_iters;
  std::optional<double> tol;
  std::optional<bool> oracle;
  std::optional<std::uint64_t> seed;
  double tol_scale = 1.0;
};

/// Picard fixed point, optional interacting-particle cross-check and
/// nonlinear superposition verification. Writes mkv.json, picard_trace.csv
/// and flow.fpkc into `out`.
DemoResult run_mkv(const nlohmann::json& cfg, const std::filesystem::path& out,
                   const MkvOptions& opts = {});

/// SNSE build, checks, cancellation, simulation, energy and verification in
/// one report (snse.json).
DemoResult run_snse_demo(const nlohmann::json& cfg, const std::filesystem::path& out,
                         std::optional<std::uint64_t> seed = {}, double tol_scale = 1.0);

}  // namespace fpk::pipeline
