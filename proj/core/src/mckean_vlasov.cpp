#include "fpk/mckean_vlasov.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "fpk/error.hpp"
#include "fpk/parallel.hpp"
#include "fpk/rng.hpp"

namespace fpk {

MeasureDependentModel::MeasureDependentModel(std::string name, std::size_t dim,
                                             std::size_t noise_dim, double horizon,
                                             std::vector<std::string> statistic_names,
                                             StatisticsFn statistics, DriftFn drift, SigmaFn sigma)
    : name_(std::move(name)),
      dim_(dim),
      noise_dim_(noise_dim),
      horizon_(horizon),
      statistic_names_(std::move(statistic_names)),
      statistics_(std::move(statistics)),
      drift_(std::move(drift)),
      sigma_(std::move(sigma)) {
  if (dim_ == 0 || noise_dim_ == 0) throw DimensionError("model dimensions must be positive");
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw Error("horizon must be positive");
}

Vector MeasureDependentModel::statistics(const Measure& rho) const {
  if (measure_dim(rho) != dim_) throw DimensionError("measure lives on a different H_n");
  Vector s = statistics_ ? statistics_(rho) : Vector();
  if (static_cast<std::size_t>(s.size()) != statistic_names_.size()) {
    throw EvaluationError(name_ + ": statistics length differs from the declared names");
  }
  if (!s.allFinite()) throw EvaluationError(name_ + ": non-finite measure statistics");
  return s;
}

void MeasureDependentModel::drift(double t, ConstVecRef y, ConstVecRef stats, VecRef out) const {
  drift_(t, y, stats, out);
}

void MeasureDependentModel::sigma(double t, ConstVecRef y, ConstVecRef stats, MatRef out) const {
  sigma_(t, y, stats, out);
}

CoefficientModel MeasureDependentModel::at_measure(const Measure& rho) const {
  auto stats = std::make_shared<const Vector>(statistics(rho));
  auto self = std::make_shared<const MeasureDependentModel>(*this);
  return CoefficientModel(
      name_ + "@measure", dim_, noise_dim_, horizon_,
      [self, stats](double t, ConstVecRef y, VecRef out) { self->drift(t, y, *stats, out); },
      [self, stats](double t, ConstVecRef y, MatRef out) { self->sigma(t, y, *stats, out); },
      false);
}

CoefficientModel freeze(const MeasureDependentModel& model, const MarginalFlow& flow) {
  flow.validate();
  if (flow.dim != model.dim()) throw DimensionError("flow and model dimensions differ");
  if (flow.times.back() < model.horizon() * (1.0 - 1e-9)) {
    throw Error("flow does not cover [0, T]");
  }
  struct Frozen {
    MeasureDependentModel model;
    MarginalFlow flow;
    std::vector<Vector> stats;
  };
  auto frozen = std::make_shared<Frozen>(Frozen{model, MarginalFlow{}, {}});
  frozen->flow.dim = flow.dim;
  frozen->flow.initial_point = flow.initial_point;
  frozen->flow.times = flow.times;
  frozen->stats.resize(flow.size());
  parallel_for(flow.size(), [&](std::size_t k) { frozen->stats[k] = model.statistics(flow.nodes[k]); });
  std::shared_ptr<const Frozen> f = frozen;
  return CoefficientModel(
      model.name() + "@flow", model.dim(), model.noise_dim(), model.horizon(),
      [f](double t, ConstVecRef y, VecRef out) {
        f->model.drift(t, y, f->stats[f->flow.nearest_node(t)], out);
      },
      [f](double t, ConstVecRef y, MatRef out) {
        f->model.sigma(t, y, f->stats[f->flow.nearest_node(t)], out);
      },
      false);
}

MarginalFlow dirac_flow(ConstVecRef x0, std::size_t n, double horizon, const SimulationSpec& spec) {
  if (static_cast<std::size_t>(x0.size()) < n) throw DimensionError("initial point too short");
  MarginalFlow flow;
  flow.dim = n;
  flow.initial_point = x0.head(static_cast<Eigen::Index>(n));
  const std::size_t nodes = spec.nodes();
  for (std::size_t k = 0; k < nodes; ++k) {
    flow.times.push_back(horizon * static_cast<double>(k * spec.record_every) /
                         static_cast<double>(spec.steps));
    flow.nodes.emplace_back(EmpiricalMeasure::dirac(flow.initial_point));
  }
  return flow;
}

nlohmann::json PicardResult::to_json() const {
  return {{"iterations", iterations},
          {"converged", converged},
          {"distance_trace", distance_trace},
          {"seed", ensemble.seed},
          {"paths", ensemble.paths}};
}

std::string PicardResult::trace_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,distance\n";
  for (std::size_t i = 0; i < distance_trace.size(); ++i) {
    os << i + 1 << ',' << distance_trace[i] << '\n';
  }
  return os.str();
}

PicardResult solve_mkv_picard(const MeasureDependentModel& model, ConstVecRef x0,
                              const SimulationSpec& spec, std::size_t max_iters, double tol,
                              const TestFamily& family) {
  if (!(tol > 0.0)) throw Error("Picard tolerance must be positive");
  if (family.empty()) throw Error("Picard iteration needs a nonempty test family");
  if (max_iters == 0) throw Error("max_iters must be positive");

  auto simulate = [&](const MarginalFlow& at, std::size_t iterate) {
    try {
      return simulate_em(freeze(model, at), x0, spec);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.path(), e.step(),
                            "Picard iterate " + std::to_string(iterate) + ": " + e.what());
    }
  };

  PicardResult res;
  MarginalFlow current = dirac_flow(x0, model.dim(), model.horizon(), spec);
  res.ensemble = simulate(current, 0);
  MarginalFlow next = marginal_flow(res.ensemble);
  for (std::size_t it = 1; it <= max_iters; ++it) {
    current = std::move(next);
    res.ensemble = simulate(current, it);
    next = marginal_flow(res.ensemble);
    const auto d = flow_distances(next, current, family);
    res.distance_trace.push_back(*std::max_element(d.begin(), d.end()));
    res.iterations = it;
    if (res.distance_trace.back() <= tol) {
      res.converged = true;
      break;
    }
  }
  res.flow = std::move(next);
  res.previous_flow = std::move(current);
  return res;
}

PathEnsemble solve_mkv_interacting(const MeasureDependentModel& model, ConstVecRef x0,
                                   const SimulationSpec& spec) {
  if (spec.steps == 0 || spec.paths == 0) throw Error("simulation needs K >= 1 and M >= 1");
  if (spec.record_every == 0 || spec.steps % spec.record_every != 0) {
    throw Error("record_every must divide the number of steps");
  }
  const std::size_t n = model.dim();
  const std::size_t m = model.noise_dim();
  if (static_cast<std::size_t>(x0.size()) < n) throw DimensionError("initial point too short");

  PathEnsemble ens;
  ens.dim = n;
  ens.paths = spec.paths;
  ens.seed = spec.seed;
  ens.model_name = model.name() + "@interacting";
  ens.steps = spec.steps;
  ens.dt = model.horizon() / static_cast<double>(spec.steps);
  ens.initial_point = x0.head(static_cast<Eigen::Index>(n));
  const std::size_t nodes = spec.nodes();
  for (std::size_t k = 0; k < nodes; ++k) {
    ens.times.push_back(model.horizon() * static_cast<double>(k * spec.record_every) /
                        static_cast<double>(spec.steps));
  }
  ens.states.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nodes * spec.paths));

  Matrix current = ens.initial_point.replicate(1, static_cast<Eigen::Index>(spec.paths));
  ens.states.leftCols(static_cast<Eigen::Index>(spec.paths)) = current;

  const CounterRng rng(spec.seed, Stream::kPaths);
  const double dt = ens.dt;
  const double sqrt_dt = std::sqrt(dt);
  for (std::size_t k = 0; k < spec.steps; ++k) {
    const double t = model.horizon() * static_cast<double>(k) / static_cast<double>(spec.steps);
    const Vector stats = model.statistics(Measure(EmpiricalMeasure(current)));
    parallel_for(spec.paths, [&](std::size_t p) {
      Vector drift(static_cast<Eigen::Index>(n));
      Matrix sigma(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
      Vector xi(static_cast<Eigen::Index>(m));
      auto x = current.col(static_cast<Eigen::Index>(p));
      model.drift(t, x, stats, drift);
      model.sigma(t, x, stats, sigma);
      if (!drift.allFinite() || !sigma.allFinite()) {
        throw EvaluationError(model.name() + ": non-finite coefficients");
      }
      rng.normals(p, static_cast<std::uint32_t>(k), xi.data(), m);
      x.noalias() += dt * drift;
      x.noalias() += sqrt_dt * (sigma * xi);
      const double norm = x.norm();
      if (!std::isfinite(norm) || norm > spec.guard) {
        throw DivergenceError(p, k + 1,
                              "particle " + std::to_string(p) + " diverged at step " +
                                  std::to_string(k + 1));
      }
    });
    if ((k + 1) % spec.record_every == 0) {
      const std::size_t node = (k + 1) / spec.record_every;
      ens.states.middleCols(static_cast<Eigen::Index>(node * spec.paths),
                            static_cast<Eigen::Index>(spec.paths)) = current;
    }
  }
  return ens;
}

nlohmann::json NonlinearReport::to_json() const {
  nlohmann::json mart = nlohmann::json::array();
  for (const auto& s : martingale) mart.push_back(s.to_json());
  return {{"superposition", superposition.to_json()},
          {"integrability", integrability},
          {"martingale", mart},
          {"z_threshold", z_threshold},
          {"verdict", to_string(verdict)}};
}

NonlinearReport verify_nonlinear_superposition(const MeasureDependentModel& model,
                                               const MarginalFlow& flow, const PathEnsemble& ens,
                                               const TestFamily& family, double tol,
                                               const TestFamily& martingale_functions,
                                               const std::vector<MartingaleCase>& cases) {
  const CoefficientModel frozen = freeze(model, flow);
  NonlinearReport rep;
  rep.superposition = verify_superposition(flow, ens, family, tol);
  rep.integrability = coefficient_integrability(flow, frozen);
  if (!cases.empty()) rep.martingale = martingale_suite(ens, frozen, martingale_functions, cases);
  bool ok = rep.superposition.verdict == Verdict::kPass && std::isfinite(rep.integrability);
  for (const auto& s : rep.martingale) {
    if (!(std::abs(s.z) <= rep.z_threshold)) ok = false;
  }
  rep.verdict = ok ? Verdict::kPass : Verdict::kFail;
  return rep;
}

namespace checks {

CheckReport measure_uniform(const MeasureDependentModel& model,
                            const std::vector<Measure>& measures, const SpaceTriple& triple,
                            const NFunction& gauge, const AssumptionParams& params,
                            const SamplePlan& plan) {
  CheckReport merged;
  merged.name = "measure_uniform";
  merged.verdict = Verdict::kPass;
  merged.worst_case.margin = std::numeric_limits<double>::infinity();
  if (measures.empty()) {
    merged.verdict = Verdict::kIndeterminate;
    return merged;
  }
  for (const auto& rho : measures) {
    const CoefficientModel frozen = model.at_measure(rho);
    for (const CheckReport& r : {coercivity(frozen, gauge, params, plan),
                                 growth(frozen, triple, gauge, params, plan),
                                 symmetry_psd(frozen, plan)}) {
      merged.samples_used += r.samples_used;
      if (r.worst_case.margin < merged.worst_case.margin) merged.worst_case = r.worst_case;
      if (r.verdict == Verdict::kFail) merged.verdict = Verdict::kFail;
    }
  }
  return merged;
}

}  // namespace checks

namespace models {

namespace {

std::vector<std::string> indexed_names(const std::string& stem, std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= n; ++i) names.push_back(stem + "_" + std::to_string(i));
  return names;
}

Vector mean_and_variance(const Measure& rho) {
  Vector s(2);
  s[0] = measure_mean(rho)[0];
  s[1] = measure_variance(rho)[0];
  return s;
}

}  // namespace

MeasureDependentModel mean_field_ou(double a, double sigma, double horizon, std::size_t n) {
  return MeasureDependentModel(
      "mean_field_ou", n, n, horizon, indexed_names("mean", n),
      [](const Measure& rho) { return measure_mean(rho); },
      [a](double, ConstVecRef y, ConstVecRef s, VecRef out) { out = -(y - a * s); },
      [sigma](double, ConstVecRef, ConstVecRef, MatRef out) {
        out.setZero();
        out.diagonal().setConstant(sigma);
      });
}

MeasureDependentModel variance_noise(double horizon, std::size_t n) {
  return MeasureDependentModel(
      "variance_noise", n, n, horizon, {"mean_1", "variance_1"}, mean_and_variance,
      [](double, ConstVecRef y, ConstVecRef, VecRef out) { out = -y; },
      [](double, ConstVecRef, ConstVecRef s, MatRef out) {
        out.setZero();
        out.diagonal().setConstant(std::sqrt(1.0 + s[1]));
      });
}

MeasureDependentModel variance_drift(double sigma, double horizon, std::size_t n) {
  return MeasureDependentModel(
      "variance_drift", n, n, horizon, {"mean_1", "variance_1"}, mean_and_variance,
      [](double, ConstVecRef y, ConstVecRef s, VecRef out) { out = y * s[1]; },
      [sigma](double, ConstVecRef, ConstVecRef, MatRef out) {
        out.setZero();
        out.diagonal().setConstant(sigma);
      });
}

MeasureDependentModel measure_independent(const CoefficientModel& base) {
  auto m = std::make_shared<const CoefficientModel>(base);
  return MeasureDependentModel(
      base.name(), base.dim(), base.noise_dim(), base.horizon(), {},
      [](const Measure&) { return Vector(); },
      [m](double t, ConstVecRef y, ConstVecRef, VecRef out) { m->drift(t, y, out); },
      [m](double t, ConstVecRef y, ConstVecRef, MatRef out) { m->sigma(t, y, out); });
}

MeasureDependentModel nonlinear_from_json(const nlohmann::json& j, double horizon) {
  const std::string name = j.at("name").get<std::string>();
  const nlohmann::json p = j.value("params", nlohmann::json::object());
  const auto n = p.value("n", std::size_t{1});
  if (name == "mean_field_ou") {
    return mean_field_ou(p.value("a", 0.5), p.value("sigma", 1.0), horizon, n);
  }
  if (name == "variance_noise") return variance_noise(horizon, n);
  if (name == "variance_drift") return variance_drift(p.value("sigma", 1.0), horizon, n);
  if (name == "linear") return measure_independent(fpk::models::from_json(j.at("model"), horizon));
  throw ConfigError("unknown nonlinear model '" + name + "'");
}

}  // namespace models

}  // namespace fpk
