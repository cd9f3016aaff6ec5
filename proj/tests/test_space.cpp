#include <cmath>
#include <random>

#include "doctest.h"
#include "fpk/error.hpp"
#include "fpk/measures.hpp"
#include "fpk/rng.hpp"
#include "fpk/space.hpp"
#include "fpk/test_functions.hpp"
#include "support.hpp"

using namespace fpk;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Central differences of the value and gradient evaluators.
void check_derivatives(const FinitelyBasedFunction& f, const Vector& y) {
  const double h = 1e-5;
  const auto d = static_cast<Eigen::Index>(f.base_dim());
  const Vector g = f.gradient(y);
  const Matrix hess = f.hessian(y);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector yp = y, ym = y;
    yp[i] += h;
    ym[i] -= h;
    const double fd = (f.value(yp) - f.value(ym)) / (2 * h);
    CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(1.0, std::abs(g[i])));
    const Vector gd = (f.gradient(yp) - f.gradient(ym)) / (2 * h);
    for (Eigen::Index j = 0; j < d; ++j) {
      CHECK(std::abs(gd[j] - hess(j, i)) <= 1e-6 * std::max(1.0, std::abs(hess(j, i))));
    }
  }
}

}  // namespace

TEST_CASE("projection keeps the leading coordinates") {
  const SpaceTriple t = SpaceTriple::unit(5);
  const Vector p = t.project(vec({1, 2, 3, 4, 5}), 2);
  CHECK(p.size() == 2);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 2.0);
  CHECK_THROWS_AS(t.project(vec({1, 2, 3, 4, 5}), 0), DimensionError);
  CHECK_THROWS_AS(t.project(vec({1, 2, 3, 4, 5}), 6), DimensionError);
}

TEST_CASE("weighted norms") {
  const SpaceTriple t({1.0, 4.0});
  CHECK(t.norm(vec({1, 1}), Norm::X) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  CHECK(t.norm(vec({1, 1}), Norm::H) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(t.norm(vec({1, 1}), Norm::XStar) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));

  const SpaceTriple zero_weight({0.0, 1.0});
  CHECK_THROWS_AS(zero_weight.norm(vec({1, 0}), Norm::XStar), SingularWeightError);
  CHECK(zero_weight.norm(vec({0, 2}), Norm::XStar) == doctest::Approx(2.0));
}

TEST_CASE("projection is a contraction and idempotent in every norm") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal;
  const SpaceTriple t({0.5, 1.0, 2.0, 3.0, 5.0, 8.0});
  for (int trial = 0; trial < 200; ++trial) {
    Vector z(6);
    for (auto& c : z) c = normal(gen);
    for (std::size_t n = 1; n <= 6; ++n) {
      const Vector p = t.project(z, n);
      for (Norm w : {Norm::X, Norm::H, Norm::XStar}) {
        CHECK(t.norm(p, w) <= t.norm(z, w) + 1e-14);
      }
      CHECK((t.project(p, n) - p).norm() == 0.0);
    }
  }
}

TEST_CASE("triple survives a JSON round trip") {
  const SpaceTriple t({1.0, 2.0, 3.0}, 1);
  const SpaceTriple u = SpaceTriple::from_json(t.to_json());
  CHECK(u.weights() == t.weights());
  CHECK(u.monotone_from() == 1);
}

TEST_CASE("generator on finitely based functions") {
  const auto sq = functions::squared_norm(2);
  const Vector y = vec({1.0, 2.0});
  CHECK(apply_L(sq, y, Matrix::Zero(2, 2), Vector::Zero(2)) == 0.0);
  CHECK(apply_L(sq, y, Matrix::Identity(2, 2), Vector::Zero(2)) == doctest::Approx(4.0));
  CHECK(apply_L(sq, y, Matrix::Zero(2, 2), y) == doctest::Approx(10.0));

  // Linearity in f.
  const auto b1 = functions::coordinate_bump(0, 0.3, 2.0, 0.0);
  const auto b2 = functions::bump_product({0.1, -0.2}, {1.5, 2.5});
  const auto combo = functions::linear_combination(2.0, b1, -3.0, b2);
  Matrix a(2, 2);
  a << 1.0, 0.25, 0.25, 0.5;
  const Vector b = vec({-0.4, 0.7});
  const double lhs = apply_L(combo, y.head(2) * 0.3, a, b);
  const double rhs = 2.0 * apply_L(b1, y.head(1) * 0.3, a.topLeftCorner(1, 1), b.head(1)) -
                     3.0 * apply_L(b2, y * 0.3, a, b);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("shipped test functions have consistent derivatives") {
  check_derivatives(functions::coordinate_bump(0, 0.2, 1.5, 0.0), vec({0.5}));
  check_derivatives(functions::coordinate_bump(1, -0.3, 2.0, 6.0), vec({0.4, 0.1}));
  check_derivatives(functions::bump_product({0.0, 0.5}, {2.0, 3.0}), vec({0.3, -0.4}));
  check_derivatives(functions::coordinate_power(1, 3), vec({0.4, -1.3}));
  check_derivatives(functions::coordinate_product(0, 1), vec({0.4, -1.3}));
  check_derivatives(functions::squared_norm(3), vec({0.4, -1.3, 2.0}));
  for (const auto& f : separating_family(2, 5, 4.0)) {
    Vector y = Vector::Constant(static_cast<Eigen::Index>(f.base_dim()), 0.37);
    check_derivatives(f, y);
  }
}

TEST_CASE("compact support is honoured") {
  const auto f = functions::coordinate_bump(0, 1.0, 0.5, 0.0);
  CHECK(f.compactly_supported());
  CHECK(f.value(vec({1.5})) == 0.0);
  CHECK(f.value(vec({0.5})) == 0.0);
  CHECK(f.value(vec({1.0})) == doctest::Approx(1.0));
  CHECK(f.value(vec({1.2})) > 0.0);
  CHECK_FALSE(functions::coordinate_power(0, 2).compactly_supported());
}

TEST_CASE("separating family distinguishes point masses") {
  const auto family = separating_family(2, 6, 4.0);
  const Measure d0 = EmpiricalMeasure::dirac(vec({0.0, 0.0}));
  const Measure d1 = EmpiricalMeasure::dirac(vec({1.0, 0.0}));
  CHECK((family_integrals(d0, family) - family_integrals(d1, family)).cwiseAbs().maxCoeff() > 0.0);
  CHECK((family_integrals(d0, family) - family_integrals(d0, family)).cwiseAbs().maxCoeff() == 0.0);

  // Every pair of lattice points in the box is separated.
  std::vector<Vector> pts;
  for (int i = -4; i <= 4; ++i)
    for (int j = -4; j <= 4; ++j) pts.push_back(vec({double(i), double(j)}));
  std::vector<Vector> integrals;
  for (const auto& p : pts) integrals.push_back(family_integrals(EmpiricalMeasure::dirac(p), family));
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b)
      CHECK((integrals[a] - integrals[b]).cwiseAbs().maxCoeff() > 1e-12);

  // Even a single member per coordinate separates.
  const auto coarse = separating_family(1, 1, 4.0);
  CHECK(coarse.size() == 1);
  CHECK(coarse[0].value(vec({-1.0})) != coarse[0].value(vec({1.0})));
}

TEST_CASE("family integrals of Gaussians match quadrature") {
  const auto family = separating_family(1, 8, 4.0);
  const auto pdf1 = [](double x) { return testing::normal_pdf(x, 0.0, 1.0); };
  const auto pdf2 = [](double x) { return testing::normal_pdf(x, 0.0, 2.0); };
  const Measure g1 = testing::cell_averaged(pdf1, -12, 12, 24000);
  const Measure g2 = testing::cell_averaged(pdf2, -12, 12, 24000);
  const Vector i1 = family_integrals(g1, family);
  const Vector i2 = family_integrals(g2, family);
  double gap = 0.0;
  for (std::size_t k = 0; k < family.size(); ++k) {
    const auto& f = family[k];
    const auto fv = [&](double x) { return f.value_raw(&x); };
    const double q1 = testing::simpson([&](double x) { return fv(x) * pdf1(x); }, -12, 12);
    const double q2 = testing::simpson([&](double x) { return fv(x) * pdf2(x); }, -12, 12);
    CHECK(i1[static_cast<Eigen::Index>(k)] == doctest::Approx(q1).epsilon(1e-6));
    CHECK(i2[static_cast<Eigen::Index>(k)] == doctest::Approx(q2).epsilon(1e-6));
    gap = std::max(gap, std::abs(q1 - q2));
  }
  CHECK(gap > 1e-3);
}

TEST_CASE("gauges") {
  const SpaceTriple t({1.0, 2.0});
  const auto n = gauges::weighted_x_squared(t);
  CHECK(n(vec({0, 0})) == 0.0);
  CHECK(n(vec({1, 1})) == doctest::Approx(3.0));
  CHECK(n(vec({2, 2})) == doctest::Approx(4.0 * n(vec({1, 1}))));
  const auto hp = gauges::h_power(3.0);
  CHECK(hp(vec({3, 4})) == doctest::Approx(125.0));
}

TEST_CASE("Philox4x32-10 known-answer vectors") {
  const auto z = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  CHECK(z == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto p = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                      {0xa4093822u, 0x299f31d0u});
  CHECK(p == Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  const auto f = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      {0xffffffffu, 0xffffffffu});
  CHECK(f == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
}

TEST_CASE("counter normals have unit moments") {
  const CounterRng rng(42, Stream::kTest);
  double s1 = 0.0, s2 = 0.0;
  const int n = 200000;
  std::vector<double> buf(2);
  for (int i = 0; i < n / 2; ++i) {
    rng.normals(static_cast<std::uint64_t>(i), 0, buf.data(), 2);
    for (double x : buf) {
      s1 += x;
      s2 += x * x;
    }
  }
  CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}
