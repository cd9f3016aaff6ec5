#include "fpk/tools/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "fpk/checks.hpp"
#include "fpk/container.hpp"
#include "fpk/error.hpp"
#include "fpk/snse.hpp"
#include "fpk/superposition.hpp"

namespace fpk::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<Stage, std::string>& stage_names() {
  static const std::map<Stage, std::string> names = {
      {Stage::kProject, "project"},       {Stage::kSolve, "solve"},
      {Stage::kSimulate, "simulate"},     {Stage::kConverge, "converge"},
      {Stage::kResidual, "residual"},     {Stage::kMartingale, "martingale"},
      {Stage::kSuperposition, "superposition"}, {Stage::kMass, "mass"}};
  return names;
}

template <class T>
T scaled(T value, double scale) {
  return value * scale;
}

json require(const json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw ConfigError(std::string(where) + ": missing key '" + key + "'");
  return j.at(key);
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string stage_name(Stage s) { return stage_names().at(s); }

Stage parse_stage(const std::string& text) {
  if (text == "check-assumptions") return Stage::kProject;
  for (const auto& [stage, name] : stage_names()) {
    if (name == text || std::to_string(static_cast<int>(stage)) == text) return stage;
  }
  if (text == "4") return Stage::kSimulate;
  throw ConfigError("unknown stage '" + text + "'");
}

std::vector<Stage> parse_stage_list(const std::string& csv) {
  std::set<Stage> chosen;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) chosen.insert(parse_stage(item));
  }
  if (chosen.empty()) throw ConfigError("empty stage list");
  return {chosen.begin(), chosen.end()};
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::kProject,  Stage::kSolve,    Stage::kSimulate,
                                            Stage::kConverge, Stage::kResidual, Stage::kMartingale,
                                            Stage::kSuperposition, Stage::kMass};
  return stages;
}

std::uint64_t RunConfig::seed(Stage s) const {
  const auto it = seeds.find(s);
  if (it == seeds.end()) throw ConfigError("no seed configured for stage " + stage_name(s));
  return it->second;
}

RunConfig RunConfig::from_json(const json& j, const Overrides& ov) {
  static const std::set<std::string> top = {
      "name",       "space",     "model",   "horizon",   "x0",          "seeds",
      "simulation", "flow",      "family",  "checks",    "residual",    "martingale",
      "convergence", "energy",   "lyapunov_ks", "tolerances", "artifacts", "stages",
      "output",     "description"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, top, "config");

  RunConfig c;
  c.source = j;
  c.name = j.value("name", std::string("run"));
  c.horizon = require(j, "horizon", "config").get<double>();
  if (!(c.horizon > 0.0)) throw ConfigError("horizon must be positive");
  c.model = require(j, "model", "config");
  const json space = require(j, "space", "config");
  if (space.is_string() && space == "snse") {
    c.triple = snse::triple(snse::Config::from_json(c.model.value("params", json::object())));
  } else {
    c.triple = SpaceTriple::from_json(space);
  }
  c.x0 = to_vector(require(j, "x0", "config").get<std::vector<double>>());
  if (static_cast<std::size_t>(c.x0.size()) < c.triple.n_max()) {
    throw ConfigError("x0 has fewer coordinates than the space");
  }

  const json seeds = require(j, "seeds", "config");
  for (const auto& [key, value] : seeds.items()) c.seeds[parse_stage(key)] = value.get<std::uint64_t>();
  if (ov.seed) {
    for (Stage s : all_stages()) c.seeds[s] = *ov.seed + static_cast<std::uint64_t>(s);
  }

  const json sim = j.value("simulation", json::object());
  c.simulation = SimulationSpec::from_json(sim);
  c.simulation_model = sim.value("model", json(nullptr));
  c.flow = j.value("flow", json{{"source", "particle"}});
  c.family = FamilySpec::from_json(j.value("family", json::object()));
  c.checks = j.value("checks", json::object());
  c.residual = j.value("residual", json::object());
  c.martingale = j.value("martingale", json::object());
  c.convergence = j.value("convergence", json::object());
  c.energy = j.value("energy", json::object());
  c.lyapunov_ks = j.value("lyapunov_ks", std::vector<int>{1});
  c.write_ensemble = j.value("artifacts", json::object()).value("ensemble", true);

  const json tol = j.value("tolerances", json::object());
  reject_unknown(tol, {"superposition", "residual", "martingale_z", "convergence"}, "tolerances");
  c.tol.superposition = scaled(tol.value("superposition", c.tol.superposition), ov.tol_scale);
  c.tol.residual = scaled(tol.value("residual", c.tol.residual), ov.tol_scale);
  c.tol.martingale_z = scaled(tol.value("martingale_z", c.tol.martingale_z), ov.tol_scale);
  if (tol.contains("convergence") && !tol.at("convergence").is_null()) {
    c.tol.convergence = scaled(tol.at("convergence").get<double>(), ov.tol_scale);
  }
  if (!(ov.tol_scale > 0.0)) throw ConfigError("tol-scale must be positive");

  if (ov.stages) {
    c.stages = *ov.stages;
  } else if (j.contains("stages")) {
    std::set<Stage> chosen;
    for (const auto& s : j.at("stages")) chosen.insert(parse_stage(s.get<std::string>()));
    c.stages.assign(chosen.begin(), chosen.end());
  } else {
    c.stages = all_stages();
  }
  c.output = ov.output ? *ov.output : fs::path(j.value("output", std::string("out")));

  // Registry names must resolve before any stage runs.
  build_model(c.model, c.horizon);
  if (!c.simulation_model.is_null()) build_model(c.simulation_model, c.horizon);
  if (c.flow.contains("model")) build_model(c.flow.at("model"), c.horizon);
  return c;
}

RunConfig RunConfig::load(const fs::path& path, const Overrides& ov) {
  RunConfig c = from_json(io::read_json(path), ov);
  // Relative paths inside the config resolve against its directory.
  if (c.flow.value("source", std::string()) == "file") {
    const fs::path p = c.flow.at("path").get<std::string>();
    if (p.is_relative()) c.flow["path"] = (path.parent_path() / p).string();
  }
  return c;
}

CoefficientModel build_model(const json& spec, double horizon) {
  if (spec.value("name", std::string()) == "snse") {
    auto cfg = snse::Config::from_json(spec.value("params", json::object()));
    cfg.horizon = horizon;
    return snse::build_coefficients(cfg);
  }
  return models::from_json(spec, horizon);
}

NFunction build_gauge(const json& spec, const SpaceTriple& triple) {
  const std::string kind = spec.value("kind", std::string("weighted_x"));
  if (kind == "weighted_x") return gauges::weighted_x_squared(triple, spec.value("scale", 1.0));
  if (kind == "h_power") return gauges::h_power(spec.value("p", 2.0));
  throw ConfigError("unknown gauge kind '" + kind + "'");
}

LyapunovData build_lyapunov(const json& spec, const SpaceTriple& triple) {
  const json theta = spec.value("theta", json{{"kind", "weighted_x"}, {"scale", 2.0}});
  const std::string kind = theta.value("kind", std::string("weighted_x"));
  const double scale = theta.value("scale", 2.0);
  std::function<double(ConstVecRef)> fn;
  std::ostringstream name;
  if (kind == "weighted_x") {
    fn = [triple, scale](ConstVecRef y) { return scale * triple.norm_squared(y, Norm::X); };
    name << scale << " |y|_X^2";
  } else if (kind == "h_squared") {
    fn = [scale](ConstVecRef y) { return scale * y.squaredNorm(); };
    name << scale << " |y|_H^2";
  } else {
    throw ConfigError("unknown theta kind '" + kind + "'");
  }
  return quadratic_lyapunov(std::move(fn), require(spec, "C0", "lyapunov").get<double>(),
                            require(spec, "M0", "lyapunov").get<double>(), name.str());
}

namespace {

// Shared products of the stages, built on first use.
class Context {
 public:
  Context(const RunConfig& cfg, const Overrides& ov) : cfg_(cfg), ov_(ov) {}

  const RunConfig& cfg() const { return cfg_; }
  std::size_t n() const { return cfg_.triple.n_max(); }

  const CoefficientModel& model() {
    if (!model_) model_ = std::make_unique<CoefficientModel>(build_model(cfg_.model, cfg_.horizon));
    return *model_;
  }

  const CoefficientModel& simulation_model() {
    if (cfg_.simulation_model.is_null()) return model();
    if (!sim_model_) {
      sim_model_ = std::make_unique<CoefficientModel>(build_model(cfg_.simulation_model, cfg_.horizon));
    }
    return *sim_model_;
  }

  const TestFamily& family() {
    if (!family_) family_ = std::make_unique<TestFamily>(separating_family(cfg_.family));
    return *family_;
  }

  const MarginalFlow& flow() {
    if (flow_) return *flow_;
    if (ov_.flow_file) {
      flow_ = std::make_unique<MarginalFlow>(io::read_flow(*ov_.flow_file));
      return *flow_;
    }
    const json& spec = cfg_.flow;
    const std::string source = spec.value("source", std::string("particle"));
    const CoefficientModel flow_model =
        spec.contains("model") ? build_model(spec.at("model"), cfg_.horizon) : model();
    if (source == "grid") {
      flow_ = std::make_unique<MarginalFlow>(
          solve_fpke_grid(flow_model, cfg_.x0, GridSpec::from_json(require(spec, "grid", "flow"))));
    } else if (source == "particle") {
      SimulationSpec s = cfg_.simulation;
      s.paths = spec.value("paths", s.paths);
      s.steps = spec.value("steps", s.steps);
      s.record_every = spec.value("record_every", s.record_every);
      s.seed = cfg_.seed(Stage::kSolve);
      flow_ = std::make_unique<MarginalFlow>(solve_fpke_particle(flow_model, cfg_.x0, s));
    } else if (source == "file") {
      flow_ = std::make_unique<MarginalFlow>(io::read_flow(require(spec, "path", "flow").get<std::string>()));
    } else {
      throw ConfigError("flow source must be grid, particle or file");
    }
    if (flow_->dim != n()) throw DimensionError("flow dimension differs from the space");
    return *flow_;
  }

  const PathEnsemble& ensemble() {
    if (ens_) return *ens_;
    if (ov_.ensemble_file) {
      ens_ = std::make_unique<PathEnsemble>(io::read_ensemble(*ov_.ensemble_file));
    } else {
      SimulationSpec s = cfg_.simulation;
      s.seed = cfg_.seed(Stage::kSimulate);
      ens_ = std::make_unique<PathEnsemble>(simulate_em(simulation_model(), cfg_.x0, s));
    }
    return *ens_;
  }

  const MarginalFlow& ensemble_flow() {
    if (!ens_flow_) ens_flow_ = std::make_unique<MarginalFlow>(marginal_flow(ensemble()));
    return *ens_flow_;
  }

  std::optional<double> s2;

 private:
  const RunConfig& cfg_;
  const Overrides& ov_;
  std::unique_ptr<CoefficientModel> model_;
  std::unique_ptr<CoefficientModel> sim_model_;
  std::unique_ptr<TestFamily> family_;
  std::unique_ptr<MarginalFlow> flow_;
  std::unique_ptr<PathEnsemble> ens_;
  std::unique_ptr<MarginalFlow> ens_flow_;
};

struct StageResult {
  Verdict verdict = Verdict::kPass;
  json report;
};

Verdict all_pass(std::initializer_list<bool> oks) {
  for (bool ok : oks) {
    if (!ok) return Verdict::kFail;
  }
  return Verdict::kPass;
}

AssumptionParams assumption_params(const RunConfig& cfg) {
  const json p = cfg.checks.value("params", json::object());
  if (p.is_string() && p == "snse") {
    return snse::constants(snse::Config::from_json(cfg.model.value("params", json::object()))).params;
  }
  return AssumptionParams::from_json(p);
}

NFunction checks_gauge(const RunConfig& cfg) {
  const json g = cfg.checks.value("gauge", json::object());
  if (g.is_string() && g == "snse") {
    return snse::constants(snse::Config::from_json(cfg.model.value("params", json::object()))).gauge;
  }
  return build_gauge(g, cfg.triple);
}

LyapunovData checks_lyapunov(const RunConfig& cfg) {
  const json l = cfg.checks.value("lyapunov", json{{"C0", 0.0}, {"M0", 0.0}});
  if (l.is_string() && l == "snse") {
    return snse::constants(snse::Config::from_json(cfg.model.value("params", json::object()))).lyapunov;
  }
  return build_lyapunov(l, cfg.triple);
}

StageResult stage_project(Context& ctx, const fs::path&) {
  const RunConfig& cfg = ctx.cfg();
  SamplePlan plan = SamplePlan::from_json(cfg.checks.value("plan", json::object()));
  plan.seed = cfg.seed(Stage::kProject);
  if (plan.truncations.empty()) plan.truncations = {ctx.n()};

  const CoefficientModel& model = ctx.model();
  const AssumptionParams params = assumption_params(cfg);
  params.validate();
  const NFunction gauge = checks_gauge(cfg);
  const LyapunovData lyap = checks_lyapunov(cfg);

  std::vector<CheckReport> reports = {
      checks::symmetry_psd(model, plan),
      checks::coercivity(model, gauge, params, plan),
      checks::growth(model, cfg.triple, gauge, params, plan),
      checks::lyapunov(model, lyap, plan),
  };
  if (!params.envelopes.empty()) {
    reports.push_back(checks::coefficient_envelope(model, lyap, params, plan));
  }
  const checks::NClassResult nclass = checks::n_class(gauge, plan);

  const Vector y = cfg.x0.head(static_cast<Eigen::Index>(ctx.n()));
  const Vector w = Vector::Unit(static_cast<Eigen::Index>(ctx.n()), 0);
  const Vector v = Vector::Ones(static_cast<Eigen::Index>(ctx.n()));
  const auto demi = checks::demicontinuity(model, 0.0, y, w, v);
  const double modulus = checks::time_modulus(model, plan, 100);

  bool ok = nclass.report.passed() && demi.decreasing();
  json list = json::array();
  for (const auto& r : reports) {
    ok = ok && r.passed();
    list.push_back(r.to_json());
  }
  json report = {{"checks", list},
                 {"n_class", nclass.to_json()},
                 {"demicontinuity",
                  {{"drift_gaps_tail", demi.drift_gaps.back()},
                   {"noise_gaps_tail", demi.noise_gaps.back()},
                   {"decreasing", demi.decreasing()}}},
                 {"time_modulus", modulus},
                 {"plan", {{"seed", plan.seed}, {"samples", plan.samples}, {"radius", plan.radius}}}};
  return {ok ? Verdict::kPass : Verdict::kFail, report};
}

StageResult stage_solve(Context& ctx, const fs::path& out) {
  const MarginalFlow& flow = ctx.flow();
  const CoefficientModel& model = ctx.model();
  const double integrability = coefficient_integrability(flow, model);
  ctx.s2 = s2_integrability(flow, model);
  const double modulus = narrow_continuity_modulus(flow, ctx.family());

  double min_mass = std::numeric_limits<double>::infinity();
  double max_mass = -min_mass;
  double min_value = std::numeric_limits<double>::infinity();
  for (const auto& node : flow.nodes) {
    if (const auto* g = std::get_if<GridDensity>(&node)) {
      min_mass = std::min(min_mass, g->mass());
      max_mass = std::max(max_mass, g->mass());
      min_value = std::min(min_value, g->values.minCoeff());
    }
  }
  const bool grid = flow.kind() == "grid";
  const bool mass_ok = !grid || (std::abs(min_mass - 1.0) <= 1e-6 && std::abs(max_mass - 1.0) <= 1e-6);
  const bool positive = !grid || min_value >= 0.0;

  io::write_flow(out / "flow.fpkc", flow);
  io::write_text(out / "flow_integrals.csv", io::family_integrals_csv(flow, ctx.family()));

  json report = {{"kind", flow.kind()},
                 {"nodes", flow.size()},
                 {"initial_bandwidth", flow.initial_bandwidth},
                 {"coefficient_integrability", integrability},
                 {"s2_integrability", *ctx.s2},
                 {"narrow_continuity_modulus", modulus},
                 {"mass_conserved", mass_ok},
                 {"nonnegative", positive},
                 {"artifact", "flow.fpkc"}};
  if (grid) {
    report["mass_range"] = {min_mass, max_mass};
    report["min_density"] = min_value;
  } else {
    report["seed"] = ctx.cfg().flow.value("source", std::string()) == "particle"
                         ? json(ctx.cfg().seed(Stage::kSolve))
                         : json(nullptr);
  }
  return {all_pass({std::isfinite(integrability), std::isfinite(*ctx.s2), mass_ok, positive}), report};
}

StageResult stage_simulate(Context& ctx, const fs::path& out) {
  const RunConfig& cfg = ctx.cfg();
  const PathEnsemble& ens = ctx.ensemble();
  const json espec = cfg.energy;
  const NFunction gauge = espec.contains("gauge") ? build_gauge(espec.at("gauge"), cfg.triple)
                                                  : checks_gauge(cfg);
  json energies = json::array();
  bool ok = std::isfinite(ens.max_path_integral);
  for (double q : espec.value("q", std::vector<double>{1.0, 2.0})) {
    const double e = energy_estimate(ens, q, gauge);
    ok = ok && std::isfinite(e);
    energies.push_back({{"q", q}, {"estimate", e}});
  }
  const MarginalFlow& flow = ctx.ensemble_flow();
  const Vector mean = measure_mean(flow.nodes.back());
  const Vector var = measure_variance(flow.nodes.back());
  if (cfg.write_ensemble) io::write_ensemble(out / "ensemble.fpkc", ens);
  io::write_text(out / "ensemble_integrals.csv", io::family_integrals_csv(flow, ctx.family()));

  json report = {{"model", ens.model_name},
                 {"paths", ens.paths},
                 {"steps", ens.steps},
                 {"nodes", ens.nodes()},
                 {"seed", ens.seed},
                 {"max_path_integral", ens.max_path_integral},
                 {"energy", energies},
                 {"final_mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
                 {"final_variance", std::vector<double>(var.data(), var.data() + var.size())},
                 {"narrow_continuity_modulus", narrow_continuity_modulus(flow, ctx.family())},
                 {"artifact", cfg.write_ensemble ? json("ensemble.fpkc") : json(nullptr)}};
  return {ok ? Verdict::kPass : Verdict::kFail, report};
}

StageResult stage_converge(Context& ctx, const fs::path& out) {
  const RunConfig& cfg = ctx.cfg();
  const json& spec = cfg.convergence;
  const json model_spec = spec.value("model", cfg.model);
  const auto levels = require(spec, "levels", "convergence").get<std::vector<std::size_t>>();
  const std::string criterion = spec.value("criterion", std::string("decreasing"));
  const bool common_noise = spec.value("common_noise", criterion == "decreasing");
  SimulationSpec sim = cfg.simulation;
  sim.paths = spec.value("paths", sim.paths);
  sim.steps = spec.value("steps", sim.steps);
  sim.record_every = spec.value("record_every", sim.record_every);
  const FamilySpec fspec = FamilySpec::from_json(spec.value("family", cfg.family.to_json()));
  const TestFamily family = separating_family(fspec);

  std::map<std::size_t, MarginalFlow> flows;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    json m = model_spec;
    m["params"]["n"] = levels[i];
    if (m["params"].contains("rates")) {
      auto rates = m["params"]["rates"].get<std::vector<double>>();
      if (rates.size() < levels[i]) throw ConfigError("convergence: too few rates for level");
      rates.resize(levels[i]);
      m["params"]["rates"] = rates;
    }
    const CoefficientModel model = build_model(m, cfg.horizon);
    Vector x0 = Vector::Ones(static_cast<Eigen::Index>(levels[i]));
    if (spec.contains("x0_value")) x0.setConstant(spec.at("x0_value").get<double>());
    SimulationSpec s = sim;
    s.seed = cfg.seed(Stage::kConverge) + (common_noise ? 0 : i);
    flows.emplace(levels[i], marginal_flow(simulate_em(model, x0, s)));
  }
  const std::vector<double> times =
      spec.value("times", std::vector<double>{flows.begin()->second.times.back()});
  const ConvergenceTable table = galerkin_convergence(flows, family, times);
  io::write_text(out / "convergence.csv", table.to_csv());

  const double tol = cfg.tol.convergence.value_or(3.0 / std::sqrt(double(sim.paths)));
  bool ok = false;
  double max_distance = 0.0;
  for (const auto& r : table.rows) max_distance = std::max(max_distance, r.distance);
  if (criterion == "decreasing") {
    ok = table.decreasing;
  } else if (criterion == "noise") {
    ok = max_distance <= tol;
  } else {
    throw ConfigError("convergence criterion must be decreasing or noise");
  }
  json report = table.to_json();
  report["criterion"] = criterion;
  report["tolerance"] = tol;
  report["max_distance"] = max_distance;
  report["seed"] = cfg.seed(Stage::kConverge);
  report["common_noise"] = common_noise;
  return {ok ? Verdict::kPass : Verdict::kFail, report};
}

TestFamily functions_from(const json& spec, const TestFamily& fallback, std::size_t count) {
  if (spec.is_array()) {
    TestFamily out;
    for (const auto& f : spec) out.push_back(functions::from_json(f));
    return out;
  }
  TestFamily out(fallback.begin(), fallback.begin() + static_cast<std::ptrdiff_t>(std::min(count, fallback.size())));
  return out;
}

StageResult stage_residual(Context& ctx, const fs::path&) {
  const RunConfig& cfg = ctx.cfg();
  const TestFamily fns = functions_from(cfg.residual.value("functions", json(nullptr)), ctx.family(), 5);
  const auto times = cfg.residual.value("times", std::vector<double>{cfg.horizon});
  const MarginalFlow& flow = ctx.flow();
  json rows = json::array();
  double worst = 0.0;
  for (const auto& f : fns) {
    const std::vector<double> res = weak_residuals(flow, f, ctx.model());
    for (double t : times) {
      const double r = res[flow.node_at(t)];
      worst = std::max(worst, r);
      rows.push_back({{"f", f.name()}, {"t", t}, {"residual", r}});
    }
  }
  json report = {{"residuals", rows}, {"max_residual", worst}, {"tolerance", cfg.tol.residual}};
  return {worst <= cfg.tol.residual ? Verdict::kPass : Verdict::kFail, report};
}

StageResult stage_martingale(Context& ctx, const fs::path& out) {
  const RunConfig& cfg = ctx.cfg();
  const json& spec = cfg.martingale;
  const TestFamily fns = functions_from(spec.value("functions", json(nullptr)), ctx.family(), 4);
  std::vector<PathFunctional> conditions;
  for (const auto& g : spec.value("conditions", json::array({json::object()}))) {
    PathFunctional pf;
    pf.name = g.value("name", std::string("1"));
    for (const auto& fac : g.value("factors", json::array())) {
      pf.factors.emplace_back(functions::from_json(fac.at("function")), fac.at("time").get<double>());
    }
    conditions.push_back(std::move(pf));
  }
  const auto pairs = spec.value("pairs", std::vector<std::array<double, 2>>{{0.0, cfg.horizon}});
  std::vector<MartingaleCase> cases;
  for (std::size_t fi = 0; fi < fns.size(); ++fi) {
    for (const auto& g : conditions) {
      for (const auto& [s, t] : pairs) {
        if (g.latest_time() <= s + 1e-12) cases.push_back({fi, g, s, t});
      }
    }
  }
  if (cases.empty()) throw ConfigError("martingale: no admissible (f, g, s, t) combination");
  const auto stats = martingale_suite(ctx.ensemble(), ctx.model(), fns, cases);
  io::write_text(out / "martingale.csv", io::martingale_csv(stats));
  json list = json::array();
  double max_z = 0.0;
  for (const auto& s : stats) {
    list.push_back(s.to_json());
    max_z = std::max(max_z, std::abs(s.z));
  }
  json report = {{"cases", list}, {"max_abs_z", max_z}, {"threshold", cfg.tol.martingale_z}};
  return {max_z <= cfg.tol.martingale_z ? Verdict::kPass : Verdict::kFail, report};
}

StageResult stage_superposition(Context& ctx, const fs::path& out) {
  const RunConfig& cfg = ctx.cfg();
  SuperpositionReport rep = verify_superposition(ctx.flow(), ctx.ensemble(), ctx.family(),
                                                 cfg.tol.superposition);
  const LyapunovData lyap = checks_lyapunov(cfg);
  bool ok = rep.verdict == Verdict::kPass;
  for (int k : cfg.lyapunov_ks) {
    rep.lyapunov.push_back(lyapunov_bound_check(ctx.ensemble_flow(), lyap, k, cfg.x0, ctx.n()));
    ok = ok && rep.lyapunov.back().verdict == Verdict::kPass;
  }
  if (!ctx.s2) ctx.s2 = s2_integrability(ctx.flow(), ctx.model());
  rep.s2 = ctx.s2;
  ok = ok && std::isfinite(*ctx.s2);
  std::ostringstream csv;
  csv.precision(17);
  csv << "t,distance\n";
  for (std::size_t i = 0; i < rep.times.size(); ++i) csv << rep.times[i] << ',' << rep.distances[i] << '\n';
  io::write_text(out / "superposition.csv", csv.str());
  return {ok ? Verdict::kPass : Verdict::kFail, rep.to_json()};
}

StageResult stage_mass(Context& ctx, const fs::path&) {
  const RunConfig& cfg = ctx.cfg();
  const MarginalFlow& flow = ctx.ensemble_flow();
  const LyapunovData lyap = checks_lyapunov(cfg);
  std::vector<double> h_finite;
  std::vector<double> v_finite;
  for (const auto& node : flow.nodes) {
    h_finite.push_back(finite_mass_fraction(node, [](ConstVecRef y) { return y.norm(); }));
    v_finite.push_back(finite_mass_fraction(node, [&](ConstVecRef y) { return lyap.value(y); }));
  }
  const double h_min = *std::min_element(h_finite.begin(), h_finite.end());
  const double v_min = *std::min_element(v_finite.begin(), v_finite.end());
  json report = {{"min_fraction_H_finite", h_min}, {"min_fraction_V_finite", v_min}, {"nodes", flow.size()}};
  return {(h_min == 1.0 && v_min == 1.0) ? Verdict::kPass : Verdict::kFail, report};
}

json seeds_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [stage, seed] : cfg.seeds) j[stage_name(stage)] = seed;
  return j;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

RunResult run(const RunConfig& cfg, const Overrides& ov) {
  const fs::path out = cfg.output;
  fs::create_directories(out / "reports");
  Context ctx(cfg, ov);
  RunResult result;
  const std::string started = utc_now();
  json stages = json::array();

  for (Stage s : cfg.stages) {
    StageOutcome outcome;
    outcome.stage = s;
    const int id = static_cast<int>(s);
    std::ostringstream fname;
    fname << std::setw(2) << std::setfill('0') << id << '_' << stage_name(s) << ".json";
    outcome.report_file = "reports/" + fname.str();
    StageResult sr;
    try {
      switch (s) {
        case Stage::kProject: sr = stage_project(ctx, out); break;
        case Stage::kSolve: sr = stage_solve(ctx, out); break;
        case Stage::kSimulate: sr = stage_simulate(ctx, out); break;
        case Stage::kConverge: sr = stage_converge(ctx, out); break;
        case Stage::kResidual: sr = stage_residual(ctx, out); break;
        case Stage::kMartingale: sr = stage_martingale(ctx, out); break;
        case Stage::kSuperposition: sr = stage_superposition(ctx, out); break;
        case Stage::kMass: sr = stage_mass(ctx, out); break;
      }
    } catch (const ConfigError& e) {
      throw;
    } catch (const std::exception& e) {
      outcome.verdict = Verdict::kFail;
      outcome.error = e.what();
      sr.verdict = Verdict::kFail;
      sr.report = {{"error", e.what()}};
    }
    outcome.verdict = sr.verdict;
    json report = {{"stage", id}, {"name", stage_name(s)}, {"verdict", to_string(sr.verdict)}};
    const auto seed_it = cfg.seeds.find(s);
    report["seed"] = seed_it == cfg.seeds.end() ? json(nullptr) : json(seed_it->second);
    report["report"] = sr.report;
    io::write_json(out / outcome.report_file, report);

    stages.push_back({{"stage", id},
                      {"name", stage_name(s)},
                      {"verdict", to_string(outcome.verdict)},
                      {"seed", report["seed"]},
                      {"report", outcome.report_file},
                      {"error", outcome.error.empty() ? json(nullptr) : json(outcome.error)}});
    result.stages.push_back(outcome);
    if (!outcome.error.empty()) {
      result.exit_code = 20 + id;
      break;
    }
    if (outcome.verdict != Verdict::kPass && result.exit_code == 0) result.exit_code = 10 + id;
  }

  result.summary = {{"name", cfg.name},
                    {"stages", stages},
                    {"verdict", result.exit_code == 0 ? "pass" : "fail"},
                    {"exit_code", result.exit_code},
                    {"config", cfg.source},
                    {"seeds", seeds_json(cfg)},
                    {"tolerances",
                     {{"superposition", cfg.tol.superposition},
                      {"residual", cfg.tol.residual},
                      {"martingale_z", cfg.tol.martingale_z},
                      {"convergence", cfg.tol.convergence ? json(*cfg.tol.convergence) : json(nullptr)}}}};
  io::write_json(out / "summary.json", result.summary);
  io::write_json(out / "metadata.json", {{"started", started},
                                         {"finished", utc_now()},
                                         {"hardware_threads", std::thread::hardware_concurrency()},
                                         {"tool", "fpklab"},
                                         {"version", "0.1.0"}});
  return result;
}

}  // namespace fpk::pipeline
