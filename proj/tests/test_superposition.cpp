#include <cmath>
#include <map>

#include "doctest.h"
#include "fpk/ensemble.hpp"
#include "fpk/error.hpp"
#include "fpk/fpke.hpp"
#include "fpk/superposition.hpp"
#include "support.hpp"

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

CoefficientModel ou() { return models::ornstein_uhlenbeck(1.0, std::sqrt(2.0), 1.0); }

MarginalFlow ou_grid_flow(std::size_t steps, std::size_t record_every) {
  GridSpec g;
  g.axes = {GridAxis{-6.0, 7.0, 1300}};
  g.steps = steps;
  g.record_every = record_every;
  return solve_fpke_grid(ou(), vec({1.0}), g);
}

// Exact OU marginals from x0 = 1 as cell-averaged densities.
MarginalFlow closed_form_ou_flow(std::size_t nodes) {
  MarginalFlow flow;
  flow.dim = 1;
  flow.initial_point = vec({1.0});
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(nodes - 1);
    flow.times.push_back(t);
    if (k == 0) {
      flow.nodes.push_back(EmpiricalMeasure::dirac(vec({1.0})));
      continue;
    }
    const auto law = testing::ou_law(1.0, t);
    flow.nodes.push_back(testing::cell_averaged(
        [&](double x) { return testing::normal_pdf(x, law.mean, law.var); }, -8.0, 9.0, 3400));
  }
  return flow;
}

GridDensity truncated_cauchy(double half_width) {
  auto g = testing::cell_averaged(
      [](double x) { return 1.0 / (std::numbers::pi * (1.0 + x * x)); }, -half_width, half_width,
      static_cast<std::size_t>(200 * half_width));
  g.values /= g.mass();
  return g;
}

}  // namespace

TEST_CASE("family distance between measures") {
  const auto family = separating_family(1, 15, 4.0);
  const Measure d0 = EmpiricalMeasure::dirac(vec({0.0}));
  const Measure d1 = EmpiricalMeasure::dirac(vec({1.0}));
  CHECK(marginal_distance(d0, d0, family) == 0.0);
  CHECK(marginal_distance(d0, d1, family) > 0.0);
  CHECK(marginal_distance(d0, d1, family) == marginal_distance(d1, d0, family));

  const auto p0 = [](double x) { return testing::normal_pdf(x, 0.0, 1.0); };
  const auto p1 = [](double x) { return testing::normal_pdf(x, 0.1, 1.0); };
  const Measure g0 = testing::cell_averaged(p0, -12, 12, 24000);
  const Measure g1 = testing::cell_averaged(p1, -12, 12, 24000);
  double oracle = 0.0;
  for (const auto& f : family) {
    const auto gap = [&](double x) { return f.value_raw(&x) * (p0(x) - p1(x)); };
    oracle = std::max(oracle, std::abs(testing::simpson(gap, -12, 12)));
  }
  CHECK(marginal_distance(g0, g1, family) == doctest::Approx(oracle).epsilon(1e-5));

  const Measure d2 = EmpiricalMeasure::dirac(vec({-0.5}));
  CHECK(marginal_distance(d0, d2, family) <=
        marginal_distance(d0, g1, family) + marginal_distance(g1, d2, family) + 1e-12);
}

TEST_CASE("superposition against the grid flow") {
  const auto family = separating_family(1, 15, 4.0);
  const auto flow = ou_grid_flow(1000, 100);
  const auto ens = simulate_em(ou(), vec({1.0}), sim(20000, 100, 10, 3));
  const auto report = verify_superposition(flow, ens, family, 2e-2);
  CHECK(report.verdict == Verdict::kPass);
  CHECK(report.distances.size() == flow.size());
  CHECK(report.family_size == family.size());

  const auto self = verify_superposition(marginal_flow(ens), ens, family, 0.0);
  CHECK(self.sup_distance() == 0.0);
  CHECK(self.verdict == Verdict::kPass);

  const auto flipped = simulate_em(models::ornstein_uhlenbeck(-1.0, std::sqrt(2.0), 1.0),
                                   vec({1.0}), sim(20000, 100, 10, 3));
  const auto bad = verify_superposition(flow, flipped, family, 2e-2);
  CHECK(bad.verdict == Verdict::kFail);
  CHECK(bad.distances[5] > 2e-2);

  const auto other_grid = simulate_em(ou(), vec({1.0}), sim(100, 100, 20, 3));
  CHECK_THROWS_AS(verify_superposition(flow, other_grid, family, 2e-2), GridMismatchError);
}

TEST_CASE("verdict is stable across seeds") {
  const auto family = separating_family(1, 15, 4.0);
  const auto flow = ou_grid_flow(1000, 100);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto ens = simulate_em(ou(), vec({1.0}), sim(10000, 100, 10, seed));
    CHECK(verify_superposition(flow, ens, family, 3e-2).verdict == Verdict::kPass);
  }
}

TEST_CASE("ensemble modulus is controlled by the flow modulus") {
  const auto family = separating_family(1, 15, 4.0);
  const auto flow = ou_grid_flow(1000, 100);
  const auto ens = simulate_em(ou(), vec({1.0}), sim(20000, 100, 10, 8));
  const auto d = flow_distances(flow, marginal_flow(ens), family);
  const double sup = *std::max_element(d.begin(), d.end());
  CHECK(narrow_continuity_modulus(marginal_flow(ens), family) <=
        narrow_continuity_modulus(flow, family) + 2.0 * sup + 1e-12);
}

TEST_CASE("Lyapunov constants") {
  CHECK(lyapunov_M(2.0, 4.0, 1) == 2.0);
  CHECK(lyapunov_N(2.0, 4.0, 1) == doctest::Approx(2.0 * std::exp(2.0) + 1.0));
  CHECK(lyapunov_M(1.0, 2.0, 2) == 6.0);
  CHECK(lyapunov_N(1.0, 2.0, 2) == doctest::Approx(6.0 * std::exp(6.0) + 1.0));
}

TEST_CASE("Lyapunov ledger on the exact OU law") {
  const auto lyap =
      quadratic_lyapunov([](ConstVecRef y) { return 2.0 * y.squaredNorm(); }, 2.0, 4.0);
  const auto flow = closed_form_ou_flow(101);
  const auto ledger = lyapunov_bound_check(flow, lyap, 1, vec({1.0}), 1);
  CHECK(ledger.verdict == Verdict::kPass);
  CHECK(ledger.W_k == 2.0);
  CHECK(ledger.rhs == doctest::Approx(2.0 * (2.0 * std::exp(2.0) + 1.0)));
  CHECK(ledger.finite_mass == doctest::Approx(1.0).epsilon(1e-12));
  // E X_t^2 = 1 for all t here, so the left side is 2 + 2t.
  for (std::size_t k = 0; k < flow.size(); ++k) {
    CHECK(ledger.lhs[k] == doctest::Approx(2.0 + 2.0 * flow.times[k]).epsilon(1e-4));
  }

  auto far = flow;
  far.nodes[50] = EmpiricalMeasure::dirac(vec({100.0}));
  CHECK(lyapunov_bound_check(far, lyap, 1, vec({1.0}), 1).verdict == Verdict::kFail);
}

TEST_CASE("s2 integrability") {
  const auto still = ou_grid_flow(1000, 100);
  CHECK(s2_integrability(still, models::zero(1, 1.0)) == 0.0);

  const auto flow = ou_grid_flow(1000, 1);
  const double oracle = testing::simpson(
      [](double t) {
        if (t == 0.0) return 2.0 / 4.0;
        const auto law = testing::ou_law(1.0, t);
        return testing::simpson(
            [&](double x) {
              const double r = 1.0 + std::abs(x);
              return (1.0 + x * x) / (r * r) * testing::normal_pdf(x, law.mean, law.var);
            },
            law.mean - 12.0 * std::sqrt(law.var), law.mean + 12.0 * std::sqrt(law.var), 4000);
      },
      0.0, 1.0, 200);
  CHECK(s2_integrability(flow, ou()) == doctest::Approx(oracle).epsilon(2e-3));

  const auto cubic = models::cubic(1, 0.01, 1.0);
  auto static_flow = [](const GridDensity& g) {
    MarginalFlow f;
    f.dim = 1;
    f.initial_point = vec({0.0});
    f.times = {0.0, 1.0};
    f.nodes = {g, g};
    return f;
  };
  const double narrow = s2_integrability(static_flow(truncated_cauchy(10.0)), cubic);
  const double wide = s2_integrability(static_flow(truncated_cauchy(100.0)), cubic);
  CHECK(std::isfinite(narrow));
  CHECK(wide > 5.0 * narrow);
}

TEST_CASE("operator norm by power iteration") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  CHECK(operator_norm(d) == doctest::Approx(3.0));
  Matrix s(2, 2);
  s << 1, 1, 0, 1;
  CHECK(operator_norm(s) == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-9));
  CHECK(operator_norm(Matrix::Zero(3, 3)) == 0.0);
}

TEST_CASE("Galerkin convergence tables") {
  const std::vector<double> times{0.5, 1.0};
  const auto family = separating_family(2, 8, 4.0);
  const std::size_t paths = 20000;

  std::map<std::size_t, MarginalFlow> decoupled;
  for (std::size_t n : {2, 4, 8}) {
    std::vector<double> rates(n);
    for (std::size_t i = 0; i < n; ++i) rates[i] = 1.0 + static_cast<double>(i);
    const auto model = models::diagonal_ou(rates, 1.0, 1.0);
    decoupled[n] = marginal_flow(
        simulate_em(model, Vector::Ones(static_cast<Eigen::Index>(n)), sim(paths, 200, 20, 100 + n)));
  }
  const auto table = galerkin_convergence(decoupled, family, times);
  CHECK(table.rows.size() == 6);
  for (const auto& row : table.rows) CHECK(row.distance <= 3.0 / std::sqrt(double(paths)));

  std::map<std::size_t, MarginalFlow> coupled;
  for (std::size_t n : {2, 4, 8, 16}) {
    const auto model = models::coupled_decay(n, 0.5, 1.0, 1.0);
    coupled[n] = marginal_flow(
        simulate_em(model, Vector::Ones(static_cast<Eigen::Index>(n)), sim(paths, 200, 20, 7)));
  }
  const auto ct = galerkin_convergence(coupled, family, times);
  CHECK(ct.decreasing);
  for (std::size_t i = 1; i < ct.sup_to_finest.size(); ++i) {
    CHECK(ct.sup_to_finest[i] < ct.sup_to_finest[i - 1]);
  }

  std::map<std::size_t, MarginalFlow> single{{2, coupled.at(2)}};
  CHECK_THROWS_AS(galerkin_convergence(single, family, times), Error);
  CHECK_THROWS_AS(galerkin_convergence(coupled, separating_family(3, 4, 4.0), times), Error);
}
