#include "fpk/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fpk/error.hpp"
#include "fpk/parallel.hpp"
#include "fpk/rng.hpp"
#include "fpk/stats.hpp"

namespace fpk {

nlohmann::json SimulationSpec::to_json() const {
  return {{"steps", steps},
          {"paths", paths},
          {"seed", seed},
          {"record_every", record_every},
          {"guard", guard}};
}

SimulationSpec SimulationSpec::from_json(const nlohmann::json& j) {
  SimulationSpec s;
  s.steps = j.value("steps", s.steps);
  s.paths = j.value("paths", s.paths);
  s.seed = j.value("seed", s.seed);
  s.record_every = j.value("record_every", s.record_every);
  s.guard = j.value("guard", s.guard);
  return s;
}

std::size_t PathEnsemble::node_at(double t) const {
  const double scale = std::max(1.0, std::abs(times.back()));
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (std::abs(times[k] - t) <= 1e-9 * scale) return k;
  }
  throw GridMismatchError("time " + std::to_string(t) + " is not a node of the ensemble");
}

PathEnsemble simulate_em(const CoefficientModel& model, ConstVecRef x0, const SimulationSpec& spec) {
  if (spec.steps == 0 || spec.paths == 0) throw Error("simulation needs K >= 1 and M >= 1");
  if (spec.record_every == 0 || spec.steps % spec.record_every != 0) {
    throw Error("record_every must divide the number of steps");
  }
  const std::size_t n = model.dim();
  const std::size_t m = model.noise_dim();
  if (static_cast<std::size_t>(x0.size()) < n) {
    throw DimensionError("initial point has fewer than n coordinates");
  }

  PathEnsemble ens;
  ens.dim = n;
  ens.paths = spec.paths;
  ens.seed = spec.seed;
  ens.model_name = model.name();
  ens.steps = spec.steps;
  ens.dt = model.horizon() / static_cast<double>(spec.steps);
  ens.initial_point = x0.head(static_cast<Eigen::Index>(n));
  const std::size_t nodes = spec.nodes();
  ens.times.resize(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    ens.times[k] = model.horizon() * static_cast<double>(k * spec.record_every) /
                   static_cast<double>(spec.steps);
  }
  ens.states.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nodes * spec.paths));

  const CounterRng rng(spec.seed, Stream::kPaths);
  const double dt = ens.dt;
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> path_integrals(spec.paths, 0.0);

  parallel_for(spec.paths, [&](std::size_t p) {
    Vector x = ens.initial_point;
    Vector drift(static_cast<Eigen::Index>(n));
    Matrix sigma(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    Vector xi(static_cast<Eigen::Index>(m));
    double integral = 0.0;
    ens.states.col(static_cast<Eigen::Index>(p)) = x;
    for (std::size_t k = 0; k < spec.steps; ++k) {
      const double t = model.horizon() * static_cast<double>(k) / static_cast<double>(spec.steps);
      model.drift(t, x, drift);
      model.sigma(t, x, sigma);
      integral += dt * (drift.norm() + sigma.squaredNorm());
      rng.normals(p, static_cast<std::uint32_t>(k), xi.data(), m);
      x.noalias() += dt * drift;
      x.noalias() += sqrt_dt * (sigma * xi);
      const double norm = x.norm();
      if (!std::isfinite(norm) || norm > spec.guard) {
        throw DivergenceError(p, k + 1,
                              "path " + std::to_string(p) + " diverged at step " +
                                  std::to_string(k + 1) + " (|x| = " + std::to_string(norm) +
                                  ", guard " + std::to_string(spec.guard) + ")");
      }
      if ((k + 1) % spec.record_every == 0) {
        const std::size_t node = (k + 1) / spec.record_every;
        ens.states.col(static_cast<Eigen::Index>(node * spec.paths + p)) = x;
      }
    }
    path_integrals[p] = integral;
  });

  for (double v : path_integrals) {
    if (!std::isfinite(v)) throw Error("path integrability guard failed: non-finite integral");
    ens.max_path_integral = std::max(ens.max_path_integral, v);
  }
  return ens;
}

EmpiricalMeasure marginal(const PathEnsemble& ens, double t) {
  return EmpiricalMeasure(Matrix(ens.node_block(ens.node_at(t))));
}

MarginalFlow marginal_flow(const PathEnsemble& ens) {
  MarginalFlow flow;
  flow.dim = ens.dim;
  flow.initial_point = ens.initial_point;
  flow.times = ens.times;
  flow.nodes.reserve(ens.nodes());
  for (std::size_t k = 0; k < ens.nodes(); ++k) {
    flow.nodes.emplace_back(EmpiricalMeasure(Matrix(ens.node_block(k))));
  }
  return flow;
}

double PathFunctional::latest_time() const {
  double latest = 0.0;
  for (const auto& [f, time] : factors) latest = std::max(latest, time);
  return latest;
}

double PathFunctional::eval(const PathEnsemble& ens, std::size_t path) const {
  double v = 1.0;
  for (const auto& [f, time] : factors) {
    v *= f.value_raw(ens.state(path, ens.node_at(time)).data());
  }
  return v;
}

nlohmann::json MartingaleStat::to_json() const {
  return {{"f", f},     {"s", s},   {"t", t},         {"g", g},
          {"stat", statistic}, {"se", standard_error}, {"z", z}, {"paths", paths}};
}

Matrix generator_along_paths(const PathEnsemble& ens, const FinitelyBasedFunction& f,
                             const CoefficientModel& model) {
  if (model.dim() != ens.dim) throw DimensionError("model and ensemble dimensions differ");
  if (f.base_dim() > ens.dim) throw DimensionError(f.name() + " exceeds the ensemble dimension");
  const auto n = static_cast<Eigen::Index>(ens.dim);
  const auto m = static_cast<Eigen::Index>(model.noise_dim());
  Matrix out(static_cast<Eigen::Index>(ens.paths), static_cast<Eigen::Index>(ens.nodes()));
  parallel_for(ens.paths, [&](std::size_t p) {
    Vector drift(n);
    Matrix sigma(n, m);
    Matrix a(n, n);
    for (std::size_t k = 0; k < ens.nodes(); ++k) {
      const auto x = ens.state(p, k);
      const double t = ens.times[k];
      model.drift(t, x, drift);
      diffusion_matrix(model, t, x, sigma, a);
      out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = apply_L(f, x, a, drift);
    }
  });
  return out;
}

std::vector<MartingaleStat> martingale_test(const PathEnsemble& ens, const FinitelyBasedFunction& f,
                                            const Matrix& lf, double s, double t,
                                            const std::vector<PathFunctional>& conditions) {
  if (conditions.empty()) throw Error("martingale test needs at least one conditioning functional");
  if (!(s < t)) throw Error("martingale test needs s < t");
  const std::size_t ks = ens.node_at(s);
  const std::size_t kt = ens.node_at(t);
  for (const auto& g : conditions) {
    if (g.latest_time() > s + 1e-12) {
      throw Error("conditioning functional " + g.name + " looks past s = " + std::to_string(s));
    }
  }

  // Martingale increment per path.
  std::vector<double> increment(ens.paths);
  for (std::size_t p = 0; p < ens.paths; ++p) {
    double integral = 0.0;
    for (std::size_t k = ks + 1; k <= kt; ++k) {
      integral += 0.5 * (ens.times[k] - ens.times[k - 1]) *
                  (lf(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) +
                   lf(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k - 1)));
    }
    increment[p] = f.value_raw(ens.state(p, kt).data()) - f.value_raw(ens.state(p, ks).data()) -
                   integral;
  }

  std::vector<MartingaleStat> out;
  std::vector<double> product(ens.paths);
  for (const auto& g : conditions) {
    for (std::size_t p = 0; p < ens.paths; ++p) product[p] = increment[p] * g.eval(ens, p);
    const auto me = stats::mean_error(product);
    MartingaleStat st;
    st.f = f.name();
    st.g = g.name;
    st.s = s;
    st.t = t;
    st.statistic = me.mean;
    st.standard_error = me.standard_error;
    if (me.standard_error > 0.0) {
      st.z = me.mean / me.standard_error;
    } else {
      st.z = me.mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), me.mean);
    }
    st.paths = ens.paths;
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<MartingaleStat> martingale_test(const PathEnsemble& ens, const FinitelyBasedFunction& f,
                                            const CoefficientModel& model, double s, double t,
                                            const std::vector<PathFunctional>& conditions) {
  return martingale_test(ens, f, generator_along_paths(ens, f, model), s, t, conditions);
}

std::vector<MartingaleStat> martingale_suite(const PathEnsemble& ens, const CoefficientModel& model,
                                             const TestFamily& functions,
                                             const std::vector<MartingaleCase>& cases) {
  std::vector<Matrix> lf(functions.size());
  std::vector<MartingaleStat> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    if (c.f >= functions.size()) throw Error("martingale case refers to a missing test function");
    if (lf[c.f].size() == 0) lf[c.f] = generator_along_paths(ens, functions[c.f], model);
    auto stats = martingale_test(ens, functions[c.f], lf[c.f], c.s, c.t, {c.g});
    out.push_back(std::move(stats.front()));
  }
  return out;
}

double energy_estimate(const PathEnsemble& ens, double q, const NFunction& gauge) {
  if (q < 1.0) throw Error("energy estimate needs q >= 1");
  std::vector<double> per_path(ens.paths);
  parallel_for(ens.paths, [&](std::size_t p) {
    double sup = 0.0;
    double integral = 0.0;
    double prev = 0.0;
    for (std::size_t k = 0; k < ens.nodes(); ++k) {
      const auto x = ens.state(p, k);
      const double h2 = x.squaredNorm();
      sup = std::max(sup, std::pow(h2, q));
      const double integrand = std::pow(h2, q - 1.0) * gauge(x);
      if (k > 0) integral += 0.5 * (ens.times[k] - ens.times[k - 1]) * (integrand + prev);
      prev = integrand;
    }
    per_path[p] = sup + integral;
  });
  double sum = 0.0;
  for (double v : per_path) sum += v;
  const double value = sum / static_cast<double>(ens.paths);
  return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
}

}  // namespace fpk
