#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/linalg.hpp"
#include "fpk/space.hpp"

namespace fpk {

/// f(y) = g(y^1, ..., y^d): a test function that reads only the first d
/// coordinates of a state. Evaluators take a pointer to those d numbers;
/// the Hessian is written row-major into a d*d buffer.
class FinitelyBasedFunction {
 public:
  using ValueFn = std::function<double(const double*)>;
  using GradientFn = std::function<void(const double*, double*)>;
  using HessianFn = std::function<void(const double*, double*)>;

  FinitelyBasedFunction(std::string name, std::size_t base_dim, double support_radius,
                        ValueFn value, GradientFn gradient, HessianFn hessian,
                        nlohmann::json spec = nullptr);

  const std::string& name() const noexcept { return name_; }
  std::size_t base_dim() const noexcept { return base_dim_; }
  /// Radius of a ball in R^d outside which g vanishes; infinity if not compact.
  double support_radius() const noexcept { return support_radius_; }
  bool compactly_supported() const noexcept {
    return support_radius_ < std::numeric_limits<double>::infinity();
  }
  /// Registry description this function was built from (null if ad hoc).
  const nlohmann::json& spec() const noexcept { return spec_; }

  double value(ConstVecRef y) const;
  Vector gradient(ConstVecRef y) const;
  Matrix hessian(ConstVecRef y) const;

  double value_raw(const double* u) const { return value_(u); }
  void gradient_raw(const double* u, double* out) const { gradient_(u, out); }
  void hessian_raw(const double* u, double* out) const { hessian_(u, out); }

 private:
  void require_dim(ConstVecRef y) const;

  std::string name_;
  std::size_t base_dim_;
  double support_radius_;
  ValueFn value_;
  GradientFn gradient_;
  HessianFn hessian_;
  nlohmann::json spec_;
};

using TestFamily = std::vector<FinitelyBasedFunction>;

/// The normalized bump exp(1 - 1/(1 - u^2)) on (-1, 1), zero outside; peak 1 at 0.
double bump_profile(double u);

namespace functions {

/// prod_i bump((y^i - center_i) / scale_i) over i < centers.size().
FinitelyBasedFunction bump_product(std::vector<double> centers, std::vector<double> scales);

/// bump((y^j - center) / scale) times a wide envelope bump(y^i / envelope)
/// on every earlier coordinate i < j, which keeps the support compact in R^{j+1}.
/// envelope <= 0 drops the envelope (the function is then not compactly supported).
FinitelyBasedFunction coordinate_bump(std::size_t coordinate, double center, double scale,
                                      double envelope);

FinitelyBasedFunction constant(double c, std::size_t base_dim = 1);

/// (y^j)^power.
FinitelyBasedFunction coordinate_power(std::size_t coordinate, int power);

/// y^i * y^j (i != j allowed to coincide).
FinitelyBasedFunction coordinate_product(std::size_t i, std::size_t j);

/// sum_{i<d} (y^i)^2.
FinitelyBasedFunction squared_norm(std::size_t base_dim);

/// alpha f + beta g on the larger of the two base dimensions.
FinitelyBasedFunction linear_combination(double alpha, const FinitelyBasedFunction& f,
                                         double beta, const FinitelyBasedFunction& g);

/// Build from a registry description, e.g. {"kind":"bump","coordinate":0,...}.
FinitelyBasedFunction from_json(const nlohmann::json& spec);

}  // namespace functions

/// Configuration of the separating family: coordinates 0..d_max-1, per_dim
/// members per coordinate taken from a dyadic lattice over [-box_radius, box_radius].
struct FamilySpec {
  std::size_t d_max = 1;
  std::size_t per_dim = 10;
  double box_radius = 4.0;

  nlohmann::json to_json() const;
  static FamilySpec from_json(const nlohmann::json& j);
};

/// Compactly supported bumps that separate distinct points of the box
/// [-R, R]^d_max (and hence point masses there).
///
/// For coordinate j the members are taken level by level: level l has
/// spacing h = 2R / 2^l, centers -R + i*h (i = 0..2^l) and scale 1.25*h.
/// The level-0 bump at -R is strictly monotone on [-R, R], so even
/// per_dim = 1 separates; finer levels add resolution.
TestFamily separating_family(std::size_t d_max, std::size_t per_dim, double box_radius = 4.0);
TestFamily separating_family(const FamilySpec& spec);

/// sum_{i,j<d} A_ij d_i d_j g(y) + sum_{i<d} b_i d_i g(y).
double apply_L(const FinitelyBasedFunction& f, ConstVecRef y, ConstMatRef a, ConstVecRef b);

/// A coercivity gauge N in the class U^rho, together with the exponent p of
/// the finite-dimensional bound N(v) <= C_n |v|^p.
struct NFunction {
  std::string name;
  double p = 2.0;
  double rho = 2.0;
  std::function<double(ConstVecRef)> eval;

  double operator()(ConstVecRef v) const { return eval(v); }
};

namespace gauges {

/// scale * |v|_X^2 with the triple's weights (p = rho = 2).
NFunction weighted_x_squared(const SpaceTriple& triple, double scale = 1.0);

/// |v|_H^p (rho = p).
NFunction h_power(double p);

}  // namespace gauges

}  // namespace fpk
