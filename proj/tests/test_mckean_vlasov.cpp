#include <cmath>

#include "doctest.h"
#include "fpk/checks.hpp"
#include "fpk/ensemble.hpp"
#include "fpk/error.hpp"
#include "fpk/mckean_vlasov.hpp"
#include "fpk/stats.hpp"
#include "fpk/superposition.hpp"

using namespace fpk;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

SimulationSpec sim(std::size_t paths, std::size_t steps, std::size_t record_every,
                   std::uint64_t seed) {
  SimulationSpec s;
  s.paths = paths;
  s.steps = steps;
  s.record_every = record_every;
  s.seed = seed;
  return s;
}

// Point masses at m(t) = t on a uniform grid over [0, horizon].
MarginalFlow moving_dirac(double horizon, std::size_t intervals) {
  MarginalFlow flow;
  flow.dim = 1;
  flow.initial_point = vec({0.0});
  for (std::size_t k = 0; k <= intervals; ++k) {
    const double t = horizon * static_cast<double>(k) / static_cast<double>(intervals);
    flow.times.push_back(t);
    flow.nodes.push_back(EmpiricalMeasure::dirac(vec({t})));
  }
  return flow;
}

stats::MeanError final_mean(const PathEnsemble& ens) {
  const auto block = ens.node_block(ens.nodes() - 1);
  std::vector<double> xs(block.row(0).begin(), block.row(0).end());
  return stats::mean_error(xs);
}

CoefficientModel ou() { return models::ornstein_uhlenbeck(1.0, std::sqrt(2.0), 1.0); }

}  // namespace

TEST_CASE("freezing substitutes the flow statistics") {
  const auto model = models::mean_field_ou(0.5, 1.0, 1.0);
  CHECK(model.statistic_names() == std::vector<std::string>{"mean_1"});
  const auto frozen = freeze(model, moving_dirac(1.0, 10));
  for (int k = 0; k <= 10; ++k) {
    const double t = 0.1 * k;
    CHECK(frozen.drift(t, vec({2.0}))[0] == doctest::Approx(-(2.0 - 0.5 * t)));
  }
  // Between nodes the nearest node is used.
  CHECK(frozen.drift(0.34, vec({0.0}))[0] == doctest::Approx(0.5 * 0.3));
  CHECK(frozen.drift(0.36, vec({0.0}))[0] == doctest::Approx(0.5 * 0.4));

  const auto noisy = freeze(models::variance_noise(1.0), moving_dirac(1.0, 10));
  CHECK(noisy.sigma(0.5, vec({1.0}))(0, 0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(freeze(model, moving_dirac(0.5, 5)), Error);
}

TEST_CASE("measure-independent coefficients freeze to themselves") {
  const auto base = ou();
  const auto frozen = freeze(models::measure_independent(base), moving_dirac(1.0, 4));
  for (double t : {0.0, 0.3, 1.0}) {
    for (double y : {-2.0, 0.5, 3.0}) {
      CHECK(frozen.drift(t, vec({y}))[0] == base.drift(t, vec({y}))[0]);
      CHECK(frozen.sigma(t, vec({y}))(0, 0) == base.sigma(t, vec({y}))(0, 0));
    }
  }
}

TEST_CASE("Picard iteration") {
  const auto family = separating_family(1, 15, 4.0);
  const auto spec = sim(20000, 200, 10, 17);

  const auto linear = solve_mkv_picard(models::measure_independent(ou()), vec({1.0}), spec, 10,
                                       1e-3, family);
  CHECK(linear.converged);
  CHECK(linear.iterations == 1);
  CHECK(linear.distance_trace.front() == 0.0);

  const auto model = models::mean_field_ou(0.5, 1.0, 1.0);
  const auto res = solve_mkv_picard(model, vec({1.0}), spec, 10, 1e-2, family);
  CHECK(res.converged);
  CHECK(res.iterations <= 10);
  const auto m = final_mean(res.ensemble);
  CHECK(std::abs(m.mean - std::exp(-0.5)) <= 3.0 * m.standard_error);

  // One more application of the map moves the flow by no more than the tolerance.
  const auto again = marginal_flow(simulate_em(freeze(model, res.flow), vec({1.0}), spec));
  const auto d = flow_distances(again, res.flow, family);
  CHECK(*std::max_element(d.begin(), d.end()) <= 1e-2);

  const auto repeat = solve_mkv_picard(model, vec({1.0}), spec, 10, 1e-2, family);
  CHECK(repeat.distance_trace == res.distance_trace);
}

TEST_CASE("strong feedback is reported deterministically") {
  const auto family = separating_family(1, 15, 4.0);
  const auto model = models::mean_field_ou(3.0, 1.0, 1.0);
  const auto spec = sim(2000, 100, 10, 5);
  const auto a = solve_mkv_picard(model, vec({1.0}), spec, 3, 1e-3, family);
  const auto b = solve_mkv_picard(model, vec({1.0}), spec, 3, 1e-3, family);
  CHECK(a.distance_trace == b.distance_trace);
  CHECK(a.iterations <= 3);
  CHECK(a.converged == (a.distance_trace.back() <= 1e-3));
}

TEST_CASE("interacting particles") {
  const auto spec = sim(20000, 200, 10, 23);
  const auto linear = solve_mkv_interacting(models::measure_independent(ou()), vec({1.0}), spec);
  const auto plain = simulate_em(ou(), vec({1.0}), spec);
  const auto d = flow_distances(marginal_flow(linear), marginal_flow(plain),
                                separating_family(1, 15, 4.0));
  CHECK(*std::max_element(d.begin(), d.end()) <= 3.0 / std::sqrt(double(spec.paths)));

  const auto mf = solve_mkv_interacting(models::mean_field_ou(0.5, 1.0, 1.0), vec({1.0}), spec);
  const auto m = final_mean(mf);
  CHECK(std::abs(m.mean - std::exp(-0.5)) <= 3.0 * m.standard_error);
}

TEST_CASE("nonlinear superposition verdicts") {
  const auto family = separating_family(1, 15, 4.0);
  const auto spec = sim(20000, 200, 10, 29);
  const auto model = models::mean_field_ou(0.5, 1.0, 1.0);
  const auto res = solve_mkv_picard(model, vec({1.0}), spec, 10, 1e-2, family);

  const TestFamily fs{functions::coordinate_power(0, 1), functions::coordinate_power(0, 2)};
  std::vector<MartingaleCase> cases;
  for (std::size_t f = 0; f < fs.size(); ++f) {
    cases.push_back({f, {"1", {}}, 0.0, 0.5});
    cases.push_back({f, {"1", {}}, 0.5, 1.0});
  }
  const auto ens = simulate_em(freeze(model, res.flow), vec({1.0}), sim(20000, 200, 10, 31));
  const auto good = verify_nonlinear_superposition(model, res.flow, ens, family, 2e-2, fs, cases);
  CHECK(good.verdict == Verdict::kPass);
  CHECK(std::isfinite(good.integrability));
  CHECK(good.martingale.size() == cases.size());

  // A flow of the wrong law: the frozen generator disagrees with the paths.
  const auto wrong = models::mean_field_ou(2.0, 1.0, 1.0);
  const auto plain = simulate_em(models::ornstein_uhlenbeck(1.0, 1.0, 1.0), vec({1.0}), spec);
  const auto bad = verify_nonlinear_superposition(wrong, marginal_flow(plain), plain, family, 2e-2,
                                                  fs, cases);
  CHECK(bad.verdict == Verdict::kFail);

  // Without measure dependence the verdict is the linear one.
  const auto linear_model = models::measure_independent(models::ornstein_uhlenbeck(1.0, 1.0, 1.0));
  const auto other = simulate_em(models::ornstein_uhlenbeck(1.0, 1.0, 1.0), vec({1.0}),
                                 sim(20000, 200, 10, 37));
  const auto nl = verify_nonlinear_superposition(linear_model, marginal_flow(plain), other, family,
                                                 2e-2);
  const auto lin = verify_superposition(marginal_flow(plain), other, family, 2e-2);
  CHECK(nl.superposition.distances == lin.distances);
  CHECK(nl.verdict == lin.verdict);
}

TEST_CASE("measure-uniform assumption checks") {
  const SpaceTriple t = SpaceTriple::unit(1);
  const auto gauge = gauges::weighted_x_squared(t);
  SamplePlan plan;
  plan.samples = 500;
  plan.radius = 10.0;
  AssumptionParams p;
  p.lambda1 = 0.5;
  p.lambda2 = 1.0;
  p.lambda3 = 2.0;
  p.lambda4 = 1.0;

  std::vector<Measure> bounded;
  for (double m : {-2.0, 0.0, 2.0}) bounded.push_back(EmpiricalMeasure::dirac(vec({m})));
  CHECK(checks::measure_uniform(models::mean_field_ou(0.5, 1.0, 1.0), bounded, t, gauge, p, plan)
            .passed());

  std::vector<Measure> spread;
  for (double s : {1.0, 10.0, 100.0}) {
    Matrix pts(1, 2);
    pts << -s, s;
    spread.push_back(EmpiricalMeasure(pts));
  }
  CHECK_FALSE(
      checks::measure_uniform(models::variance_drift(1.0, 1.0), spread, t, gauge, p, plan).passed());

  const auto base = models::ornstein_uhlenbeck(1.0, 1.0, 1.0);
  const bool uniform =
      checks::measure_uniform(models::measure_independent(base), bounded, t, gauge, p, plan).passed();
  const bool linear = checks::coercivity(base, gauge, p, plan).passed() &&
                      checks::growth(base, t, gauge, p, plan).passed() &&
                      checks::symmetry_psd(base, plan).passed();
  CHECK(uniform == linear);
  CHECK(uniform);
}
