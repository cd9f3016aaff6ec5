#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fpk/container.hpp"
#include "fpk/error.hpp"
#include "fpk/tools/demos.hpp"
#include "fpk/tools/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fpk::pipeline;

struct CommonFlags {
  std::string config;
  std::string out;
  std::string stages;
  std::optional<std::uint64_t> seed;
  double tol_scale = 1.0;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_stages) {
  cmd->add_option("--config", f.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory (overrides the config)");
  if (with_stages) cmd->add_option("--stages", f.stages, "Comma-separated stage names or numbers");
  cmd->add_option("--seed-override", f.seed, "Replace every stage seed by N + stage number");
  cmd->add_option("--tol-scale", f.tol_scale, "Multiply every tolerance")->check(CLI::PositiveNumber);
}

void print_summary(const RunResult& r) {
  for (const auto& s : r.stages) {
    std::cout << "stage " << static_cast<int>(s.stage) << " " << stage_name(s.stage) << ": "
              << fpk::to_string(s.verdict);
    if (!s.error.empty()) std::cout << " (" << s.error << ")";
    std::cout << "\n";
  }
  std::cout << "verdict: " << (r.exit_code == 0 ? "pass" : "fail") << " (exit " << r.exit_code << ")\n";
}

int run_stages(const CommonFlags& f, std::optional<std::vector<Stage>> fixed,
               std::optional<fs::path> flow_file = {}, std::optional<fs::path> ens_file = {}) {
  Overrides ov;
  ov.seed = f.seed;
  ov.tol_scale = f.tol_scale;
  if (!f.out.empty()) ov.output = f.out;
  if (!f.stages.empty()) {
    ov.stages = parse_stage_list(f.stages);
  } else if (fixed) {
    ov.stages = fixed;
  }
  ov.flow_file = flow_file;
  ov.ensemble_file = ens_file;
  const RunConfig cfg = RunConfig::load(f.config, ov);
  const RunResult r = run(cfg, ov);
  print_summary(r);
  return r.exit_code;
}

fs::path demo_out(const CommonFlags& f, const nlohmann::json& cfg) {
  return f.out.empty() ? fs::path(cfg.value("output", std::string("out"))) : fs::path(f.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fpklab: finite-dimensional checks of the superposition principle for SPDE FPKEs"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string flow_file;
  std::string ens_file;
  MkvOptions mkv;
  bool no_oracle = false;
  bool oracle = false;

  auto* check = app.add_subcommand("check-assumptions", "Run the coefficient checkers");
  auto* solve = app.add_subcommand("solve", "Solve the truncated FPKE (grid or particle flow)");
  auto* simulate = app.add_subcommand("simulate", "Simulate the Euler-Maruyama ensemble");
  auto* verify = app.add_subcommand("verify", "Compare a flow with an ensemble");
  auto* converge = app.add_subcommand("converge", "Cross-truncation convergence table");
  auto* run_cmd = app.add_subcommand("run", "Full pipeline");
  auto* mkv_cmd = app.add_subcommand("mkv", "McKean-Vlasov Picard iteration and verification");
  auto* snse_cmd = app.add_subcommand("snse-demo", "Stochastic Navier-Stokes demonstration");

  for (auto* c : {check, solve, simulate, converge}) add_common(c, flags, false);
  add_common(verify, flags, false);
  verify->add_option("--flow", flow_file, "Flow container to verify")->check(CLI::ExistingFile);
  verify->add_option("--ensemble", ens_file, "Ensemble container to verify")->check(CLI::ExistingFile);
  add_common(run_cmd, flags, true);
  add_common(mkv_cmd, flags, false);
  mkv_cmd->add_option("--max-iters", mkv.max_iters, "Picard iteration cap");
  mkv_cmd->add_option("--tol", mkv.tol, "Picard flow-to-flow tolerance");
  mkv_cmd->add_flag("--oracle", oracle, "Run the interacting-particle cross-check");
  mkv_cmd->add_flag("--no-oracle", no_oracle, "Skip the interacting-particle cross-check");
  add_common(snse_cmd, flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigErrorExit;
  }

  try {
    if (check->parsed()) return run_stages(flags, std::vector<Stage>{Stage::kProject});
    if (solve->parsed()) return run_stages(flags, std::vector<Stage>{Stage::kSolve});
    if (simulate->parsed()) return run_stages(flags, std::vector<Stage>{Stage::kSimulate});
    if (converge->parsed()) return run_stages(flags, std::vector<Stage>{Stage::kConverge});
    if (verify->parsed()) {
      return run_stages(flags, std::vector<Stage>{Stage::kSuperposition},
                        flow_file.empty() ? std::nullopt : std::optional<fs::path>(flow_file),
                        ens_file.empty() ? std::nullopt : std::optional<fs::path>(ens_file));
    }
    if (run_cmd->parsed()) return run_stages(flags, std::nullopt);
    if (mkv_cmd->parsed()) {
      const auto cfg = fpk::io::read_json(flags.config);
      if (oracle) mkv.oracle = true;
      if (no_oracle) mkv.oracle = false;
      mkv.seed = flags.seed;
      mkv.tol_scale = flags.tol_scale;
      const DemoResult r = run_mkv(cfg, demo_out(flags, cfg), mkv);
      std::cout << "picard iterations: " << r.report["picard"]["iterations"]
                << ", converged: " << r.report["picard"]["converged"] << "\n"
                << "verdict: " << r.report["verdict"].get<std::string>() << " (exit " << r.exit_code << ")\n";
      return r.exit_code;
    }
    if (snse_cmd->parsed()) {
      const auto cfg = fpk::io::read_json(flags.config);
      const DemoResult r = run_snse_demo(cfg, demo_out(flags, cfg), flags.seed, flags.tol_scale);
      std::cout << "verdict: " << r.report["verdict"].get<std::string>() << " (exit " << r.exit_code << ")\n";
      return r.exit_code;
    }
  } catch (const fpk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigErrorExit;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigErrorExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 28;
  }
  return 0;
}
