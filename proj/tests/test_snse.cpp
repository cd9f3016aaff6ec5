#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fpk/checks.hpp"
#include "fpk/ensemble.hpp"
#include "fpk/error.hpp"
#include "fpk/fpke.hpp"
#include "fpk/snse.hpp"
#include "fpk/superposition.hpp"

using namespace fpk;

namespace {

constexpr int kGrid = 32;

// Velocity field p_k trig(k . x) / (pi sqrt(2) |k|) and its Jacobian, sampled
// on the kGrid x kGrid torus grid; independent of the library's basis.
struct SampledMode {
  std::vector<double> u1, u2;                // velocity components
  std::vector<double> d11, d12, d21, d22;    // d_j u_i as dij
};

SampledMode sample(const snse::Mode& m) {
  SampledMode s;
  const double pi = std::numbers::pi;
  const double n = 1.0 / (pi * std::sqrt(2.0 * m.k_squared()));
  const double p1 = -m.k2, p2 = m.k1;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const double x1 = 2 * pi * i / kGrid, x2 = 2 * pi * j / kGrid;
      const double ph = m.k1 * x1 + m.k2 * x2;
      const double tr = m.sine ? std::sin(ph) : std::cos(ph);
      const double dtr = m.sine ? std::cos(ph) : -std::sin(ph);
      s.u1.push_back(n * p1 * tr);
      s.u2.push_back(n * p2 * tr);
      s.d11.push_back(n * p1 * dtr * m.k1);
      s.d12.push_back(n * p1 * dtr * m.k2);
      s.d21.push_back(n * p2 * dtr * m.k1);
      s.d22.push_back(n * p2 * dtr * m.k2);
    }
  }
  return s;
}

// T[a][b][c] = int (phi_a . grad) phi_b . phi_c dx by the trapezoid rule,
// exact for trigonometric polynomials of degree below kGrid.
std::vector<double> oracle_tensor(const std::vector<snse::Mode>& modes) {
  const std::size_t n = modes.size();
  std::vector<SampledMode> s;
  for (const auto& m : modes) s.push_back(sample(m));
  const double cell = std::pow(2 * std::numbers::pi / kGrid, 2);
  std::vector<double> t(n * n * n, 0.0);
  std::vector<double> w1(kGrid * kGrid), w2(kGrid * kGrid);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t q = 0; q < w1.size(); ++q) {
        w1[q] = s[a].u1[q] * s[b].d11[q] + s[a].u2[q] * s[b].d12[q];
        w2[q] = s[a].u1[q] * s[b].d21[q] + s[a].u2[q] * s[b].d22[q];
      }
      for (std::size_t c = 0; c < n; ++c) {
        double sum = 0.0;
        for (std::size_t q = 0; q < w1.size(); ++q) sum += w1[q] * s[c].u1[q] + w2[q] * s[c].u2[q];
        t[(a * n + b) * n + c] = sum * cell;
      }
    }
  }
  return t;
}

Vector random_state(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> normal;
  Vector u(static_cast<Eigen::Index>(n));
  for (auto& c : u) c = normal(gen);
  return u;
}

}  // namespace

TEST_CASE("retained modes") {
  const auto modes = snse::retained_modes(4);
  CHECK(modes.size() == 48);
  for (const auto& m : modes) {
    CHECK(m.k_squared() <= 16);
    CHECK((m.k1 > 0 || (m.k1 == 0 && m.k2 > 0)));
    const auto p = m.polarization();
    CHECK(p[0] * m.k1 + p[1] * m.k2 == 0);
  }
  CHECK(snse::retained_modes(1).size() == 4);
  CHECK_THROWS_AS(snse::Galerkin(0), Error);
  snse::Config bad;
  bad.k_max = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("basis is orthonormal and divergence free") {
  const snse::Galerkin g(3);
  const std::size_t n = g.dim();
  std::vector<std::vector<std::array<double, 2>>> v(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (int i = 0; i < kGrid; ++i)
      for (int j = 0; j < kGrid; ++j)
        v[a].push_back(g.basis(a, 2 * std::numbers::pi * i / kGrid, 2 * std::numbers::pi * j / kGrid));
  }
  const double cell = std::pow(2 * std::numbers::pi / kGrid, 2);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      double ip = 0.0;
      for (std::size_t q = 0; q < v[a].size(); ++q) ip += v[a][q][0] * v[b][q][0] + v[a][q][1] * v[b][q][1];
      CHECK(std::abs(ip * cell - (a == b ? 1.0 : 0.0)) <= 1e-12);
    }
  }
  const double h = 1e-6;
  for (std::size_t a = 0; a < n; ++a) {
    const double x1 = 0.3, x2 = 1.1;
    const double div = (g.basis(a, x1 + h, x2)[0] - g.basis(a, x1 - h, x2)[0] +
                        g.basis(a, x1, x2 + h)[1] - g.basis(a, x1, x2 - h)[1]) / (2 * h);
    CHECK(std::abs(div) <= 1e-8);
  }
}

TEST_CASE("trilinear entries agree with pseudo-spectral quadrature") {
  const snse::Galerkin g(4);
  const std::size_t n = g.dim();
  const auto oracle = oracle_tensor(g.modes());
  std::vector<double> lib(n * n * n, 0.0);
  for (const auto& e : g.entries()) lib[(e.alpha * n + e.beta) * n + e.gamma] += e.value;
  double worst = 0.0;
  std::size_t nonzero = 0;
  double frob_const = 0.0;
  std::vector<double> frob(n, 0.0);
  for (std::size_t i = 0; i < lib.size(); ++i) {
    worst = std::max(worst, std::abs(lib[i] - oracle[i]));
    if (std::abs(oracle[i]) > 1e-12) ++nonzero;
    frob[i % n] += oracle[i] * oracle[i];
  }
  CHECK(worst <= 1e-12);
  CHECK(g.entries().size() == nonzero);
  double frob_max = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    frob_const += frob[c] / g.modes()[c].k_squared();
    frob_max = std::max(frob_max, std::sqrt(frob[c]));
  }
  CHECK(g.frobenius_constant() == doctest::Approx(frob_const).epsilon(1e-10));
  CHECK(g.max_frobenius() == doctest::Approx(frob_max).epsilon(1e-10));

  std::mt19937_64 gen(5);
  const Vector u = random_state(gen, n);
  const Vector w = random_state(gen, n);
  const Vector b = g.convective(u, w);
  for (std::size_t c = 0; c < n; ++c) {
    double expect = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t bb = 0; bb < n; ++bb)
        expect += oracle[(a * n + bb) * n + c] * u[static_cast<Eigen::Index>(a)] *
                  w[static_cast<Eigen::Index>(bb)];
    CHECK(b[static_cast<Eigen::Index>(c)] == doctest::Approx(expect).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("nonlinearity conserves energy") {
  const snse::Galerkin g(4);
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector u = random_state(gen, g.dim());
    const Vector v = random_state(gen, g.dim());
    CHECK(std::abs(g.convective(u, u).dot(u)) <= 1e-12 * std::pow(u.norm(), 3));
    CHECK(std::abs(g.convective(u, v).dot(v)) <= 1e-12 * u.norm() * v.squaredNorm());
  }
  for (std::size_t a = 0; a < g.dim(); ++a) {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(g.dim()));
    e[static_cast<Eigen::Index>(a)] = 1.0;
    CHECK(g.convective(e, e).norm() <= 1e-14);
  }
}

TEST_CASE("coefficient modes") {
  snse::Config cfg;
  cfg.drift = snse::DriftMode::kLinear;
  const auto linear = snse::build_coefficients(cfg);
  const auto modes = snse::retained_modes(cfg.k_max);
  std::mt19937_64 gen(3);
  const Vector y = random_state(gen, modes.size());
  const Vector b = linear.drift(0.5, y);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    CHECK(b[k] == doctest::Approx(-cfg.viscosity * modes[i].k_squared() * y[k]));
  }
  const auto q = snse::noise_variances(cfg, modes);
  const Matrix s = linear.sigma(0.5, y);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    CHECK(s(k, k) * s(k, k) == doctest::Approx(2.0 * q[i]));
    CHECK(q[i] == doctest::Approx(cfg.noise_amplitude / modes[i].k_squared()));
  }

  cfg.drift = snse::DriftMode::kFull;
  const auto full = snse::build_coefficients(cfg);
  const snse::Galerkin g(cfg.k_max);
  CHECK((full.drift(0.5, y) - (b - g.convective(y, y))).norm() <= 1e-12 * b.norm());
  cfg.drift = snse::DriftMode::kNone;
  CHECK(snse::build_coefficients(cfg).drift(0.5, y).norm() == 0.0);
}

TEST_CASE("shipped checkers pass with the derived constants") {
  snse::Config cfg;
  const auto model = snse::build_coefficients(cfg);
  const auto tr = snse::triple(cfg);
  const auto c = snse::constants(cfg);
  SamplePlan plan;
  plan.samples = 500;
  plan.radius = 10.0;
  CHECK(checks::symmetry_psd(model, plan).passed());
  CHECK(checks::coercivity(model, c.gauge, c.params, plan).passed());
  CHECK(checks::growth(model, tr, c.gauge, c.params, plan).passed());
  CHECK(checks::lyapunov(model, c.lyapunov, plan).passed());
  CHECK(checks::coefficient_envelope(model, c.lyapunov, c.params, plan).passed());
}

TEST_CASE("energy balance") {
  snse::Config cfg;
  cfg.drift = snse::DriftMode::kNone;
  const auto model = snse::build_coefficients(cfg);
  const std::size_t n = model.dim();
  SimulationSpec spec;
  spec.paths = 2000;
  spec.steps = 100;
  spec.record_every = 10;
  spec.seed = 13;
  const Vector x0 = Vector::Constant(static_cast<Eigen::Index>(n), 0.1);
  const auto noise_only = snse::energy_check(simulate_em(model, x0, spec), cfg);
  CHECK(noise_only.equality);
  CHECK(noise_only.verdict == Verdict::kPass);

  cfg.drift = snse::DriftMode::kFull;
  const auto full = snse::energy_check(simulate_em(snse::build_coefficients(cfg), x0, spec), cfg);
  CHECK_FALSE(full.equality);
  CHECK(full.verdict == Verdict::kPass);

  snse::Config quiet;
  quiet.noise_amplitude = 0.0;
  quiet.viscosity = 1.0;
  const auto still =
      simulate_em(snse::build_coefficients(quiet), Vector::Zero(static_cast<Eigen::Index>(n)), spec);
  CHECK(still.states.norm() == 0.0);
  const auto decay = simulate_em(snse::build_coefficients(quiet), x0, spec);
  for (std::size_t k = 1; k < decay.nodes(); ++k) {
    CHECK(decay.state(0, k).norm() < decay.state(0, k - 1).norm());
  }
}

TEST_CASE("s2 integrability of the Galerkin flow is finite") {
  snse::Config cfg;
  const auto model = snse::build_coefficients(cfg);
  SimulationSpec spec;
  spec.paths = 500;
  spec.steps = 50;
  spec.record_every = 10;
  const Vector x0 = Vector::Constant(static_cast<Eigen::Index>(model.dim()), 0.1);
  const auto flow = solve_fpke_particle(model, x0, spec);
  const double s2 = s2_integrability(flow, model);
  CHECK(std::isfinite(s2));
  CHECK(s2 > 0.0);
}
