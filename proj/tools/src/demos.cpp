#include "fpk/tools/demos.hpp"

#include <algorithm>
#include <cmath>

#include "fpk/checks.hpp"
#include "fpk/container.hpp"
#include "fpk/error.hpp"
#include "fpk/mckean_vlasov.hpp"
#include "fpk/snse.hpp"
#include "fpk/superposition.hpp"

namespace fpk::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Vector vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::uint64_t seed_of(const json& seeds, const char* key, std::optional<std::uint64_t> base,
                      std::uint64_t offset) {
  if (base) return *base + offset;
  if (!seeds.contains(key)) throw ConfigError(std::string("missing seed '") + key + "'");
  return seeds.at(key).get<std::uint64_t>();
}

}  // namespace

DemoResult run_mkv(const json& cfg, const fs::path& out, const MkvOptions& opts) {
  const double horizon = cfg.at("horizon").get<double>();
  const MeasureDependentModel model = models::nonlinear_from_json(cfg.at("model"), horizon);
  const Vector x0 = vector_from(cfg.at("x0"));
  const json seeds = cfg.value("seeds", json::object());
  SimulationSpec sim = SimulationSpec::from_json(cfg.value("simulation", json::object()));
  sim.seed = seed_of(seeds, "picard", opts.seed, 1);
  const TestFamily family = separating_family(FamilySpec::from_json(cfg.value("family", json::object())));
  const json picard = cfg.value("picard", json::object());
  const std::size_t max_iters = opts.max_iters.value_or(picard.value("max_iters", std::size_t{10}));
  const double tol = opts.tol.value_or(picard.value("tol", 2e-2)) * opts.tol_scale;
  const bool oracle = opts.oracle.value_or(cfg.value("oracle", true));
  const double verify_tol =
      cfg.value("tolerances", json::object()).value("superposition", 2e-2) * opts.tol_scale;

  const PicardResult res = solve_mkv_picard(model, x0, sim, max_iters, tol, family);
  io::write_text(out / "picard_trace.csv", res.trace_csv());
  io::write_flow(out / "flow.fpkc", res.flow);

  bool ok = res.converged;
  json report = {{"model", model.name()},
                 {"statistics", model.statistic_names()},
                 {"picard", res.to_json()},
                 {"picard_tolerance", tol}};
  const Vector mean = measure_mean(res.flow.nodes.back());
  report["final_mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());

  if (oracle) {
    SimulationSpec osim = sim;
    osim.seed = seed_of(seeds, "interacting", opts.seed, 2);
    const PathEnsemble inter = solve_mkv_interacting(model, x0, osim);
    const auto d = flow_distances(res.flow, marginal_flow(inter), family);
    const double sup = *std::max_element(d.begin(), d.end());
    const double bound = 2.0 * 3.0 / std::sqrt(double(sim.paths)) * opts.tol_scale;
    report["oracle"] = {{"sup_distance", sup}, {"bound", bound}, {"seed", osim.seed}, {"pass", sup <= bound}};
    ok = ok && sup <= bound;
  }

  SimulationSpec vsim = sim;
  vsim.seed = seed_of(seeds, "verify", opts.seed, 3);
  const PathEnsemble ens = simulate_em(freeze(model, res.flow), x0, vsim);
  const TestFamily mfns = {functions::coordinate_power(0, 1), functions::coordinate_power(0, 2)};
  std::vector<MartingaleCase> cases;
  for (std::size_t f = 0; f < mfns.size(); ++f) {
    cases.push_back({f, PathFunctional{"1", {}}, 0.0, horizon / 2});
    cases.push_back({f, PathFunctional{"1", {}}, horizon / 2, horizon});
  }
  const NonlinearReport nl = verify_nonlinear_superposition(model, res.flow, ens, family,
                                                            verify_tol, mfns, cases);
  report["verification"] = nl.to_json();
  report["verification"]["seed"] = vsim.seed;
  ok = ok && nl.verdict == Verdict::kPass;
  report["verdict"] = ok ? "pass" : "fail";
  io::write_json(out / "mkv.json", report);
  return {ok ? 0 : 18, report};
}

DemoResult run_snse_demo(const json& cfg, const fs::path& out, std::optional<std::uint64_t> seed,
                         double tol_scale) {
  snse::Config sc = snse::Config::from_json(cfg.at("snse"));
  const CoefficientModel model = snse::build_coefficients(sc);
  const snse::Galerkin galerkin(sc.k_max);
  const SpaceTriple triple = snse::triple(sc);
  const snse::Constants constants = snse::constants(sc);
  const std::size_t n = galerkin.dim();
  const json seeds = cfg.value("seeds", json::object());

  Vector x0 = Vector::Zero(static_cast<Eigen::Index>(n));
  const json x0_spec = cfg.value("x0", json::object());
  if (x0_spec.is_array()) {
    x0 = vector_from(x0_spec);
    if (static_cast<std::size_t>(x0.size()) != n) throw ConfigError("x0 length differs from n");
  } else {
    for (const auto& m : x0_spec.value("modes", json::array())) {
      x0[m.at(0).get<Eigen::Index>()] = m.at(1).get<double>();
    }
  }

  // Assumption checks with the derived constants.
  SamplePlan plan = SamplePlan::from_json(cfg.value("checks", json::object()));
  plan.seed = seed_of(seeds, "checks", seed, 1);
  plan.truncations = {n};
  std::vector<CheckReport> checks = {
      checks::symmetry_psd(model, plan),
      checks::coercivity(model, constants.gauge, constants.params, plan),
      checks::growth(model, triple, constants.gauge, constants.params, plan),
      checks::lyapunov(model, constants.lyapunov, plan),
      checks::coefficient_envelope(model, constants.lyapunov, constants.params, plan),
  };
  const auto nclass = checks::n_class(constants.gauge, plan);
  bool ok = nclass.report.passed();
  json check_list = json::array();
  for (const auto& r : checks) {
    ok = ok && r.passed();
    check_list.push_back(r.to_json());
  }

  // Energy cancellation <B(u, u), u> = 0.
  SamplePlan cplan = plan;
  cplan.seed = seed_of(seeds, "cancellation", seed, 2);
  cplan.samples = cfg.value("cancellation_samples", std::size_t{1000});
  double worst = 0.0;
  Vector b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < cplan.samples; ++i) {
    const Vector u = cplan.state(i, n);
    const double norm = u.norm();
    if (norm == 0.0) continue;
    galerkin.convective(u, u, b);
    worst = std::max(worst, std::abs(b.dot(u)) / (norm * norm * norm));
  }
  ok = ok && worst <= 1e-12;

  // Simulation, energy balance and marginal verification.
  SimulationSpec sim = SimulationSpec::from_json(cfg.value("simulation", json::object()));
  sim.seed = seed_of(seeds, "simulate", seed, 3);
  const PathEnsemble ens = simulate_em(model, x0, sim);
  const snse::EnergyReport energy = snse::energy_check(ens, sc);
  ok = ok && energy.verdict == Verdict::kPass;

  snse::Config quiet = sc;
  quiet.drift = snse::DriftMode::kNone;
  const PathEnsemble free_ens = simulate_em(snse::build_coefficients(quiet), x0, sim);
  const snse::EnergyReport free_energy = snse::energy_check(free_ens, quiet);
  ok = ok && free_energy.verdict == Verdict::kPass;

  SimulationSpec fsim = sim;
  fsim.seed = seed_of(seeds, "flow", seed, 4);
  const MarginalFlow flow = solve_fpke_particle(model, x0, fsim);
  const double s2 = s2_integrability(flow, model);
  ok = ok && std::isfinite(s2);
  const TestFamily family = separating_family(FamilySpec::from_json(cfg.value("family", json::object())));
  const double tol = cfg.value("tolerances", json::object()).value("superposition", 0.08) * tol_scale;
  const SuperpositionReport sup = verify_superposition(flow, ens, family, tol);
  ok = ok && sup.verdict == Verdict::kPass;

  json report = {{"config", sc.to_json()},
                 {"n", n},
                 {"trilinear_entries", galerkin.entries().size()},
                 {"constants", constants.to_json()},
                 {"checks", check_list},
                 {"n_class", nclass.to_json()},
                 {"cancellation", {{"samples", cplan.samples}, {"max_relative", worst}, {"bound", 1e-12}}},
                 {"energy", energy.to_json()},
                 {"energy_noise_only", free_energy.to_json()},
                 {"s2_integrability", s2},
                 {"superposition", sup.to_json()},
                 {"seeds", {{"checks", plan.seed}, {"cancellation", cplan.seed},
                            {"simulate", sim.seed}, {"flow", fsim.seed}}},
                 {"verdict", ok ? "pass" : "fail"}};
  io::write_json(out / "snse.json", report);
  return {ok ? 0 : 18, report};
}

}  // namespace fpk::pipeline
