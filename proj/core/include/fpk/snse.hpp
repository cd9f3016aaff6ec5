#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/coefficients.hpp"
#include "fpk/ensemble.hpp"
#include "fpk/space.hpp"
#include "fpk/test_functions.hpp"

namespace fpk::snse {

enum class DriftMode { kFull, kLinear, kNone };

struct Config {
  double viscosity = 0.1;
  int k_max = 4;
  double noise_amplitude = 0.05;  // q_k = amplitude / |k|^decay
  double noise_decay = 2.0;
  double horizon = 1.0;
  DriftMode drift = DriftMode::kFull;

  void validate() const;
  nlohmann::json to_json() const;
  static Config from_json(const nlohmann::json& j);
};

/// One real Fourier coordinate: p_k trig(k . x) with p_k = (-k2, k1), taken
/// from the half plane k1 > 0 or (k1 = 0, k2 > 0).
struct Mode {
  int k1 = 0;
  int k2 = 0;
  bool sine = false;

  int k_squared() const noexcept { return k1 * k1 + k2 * k2; }
  std::array<int, 2> polarization() const noexcept { return {-k2, k1}; }
};

/// Retained modes ordered by |k|^2, then k1, k2, cosine before sine.
std::vector<Mode> retained_modes(int k_max);

/// Spectral Galerkin truncation of the 2-D Navier-Stokes nonlinearity on
/// the torus [0, 2 pi)^2 in an L^2-orthonormal divergence-free basis.
class Galerkin {
 public:
  struct Entry {
    std::size_t alpha;
    std::size_t beta;
    std::size_t gamma;
    double value;  // int (phi_alpha . grad) phi_beta . phi_gamma dx
  };

  explicit Galerkin(int k_max);

  std::size_t dim() const noexcept { return modes_.size(); }
  const std::vector<Mode>& modes() const noexcept { return modes_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  /// phi_alpha(x) as a velocity vector.
  std::array<double, 2> basis(std::size_t alpha, double x1, double x2) const;
  /// B_n(u, v)_gamma = sum T_{alpha beta gamma} u_alpha v_beta.
  void convective(ConstVecRef u, ConstVecRef v, VecRef out) const;
  Vector convective(ConstVecRef u, ConstVecRef v) const;

  /// sum_gamma |T_gamma|_F^2 / |k_gamma|^2.
  double frobenius_constant() const;
  /// max_gamma |T_gamma|_F.
  double max_frobenius() const;

 private:
  std::vector<Mode> modes_;
  std::vector<Entry> entries_;
};

/// Per-mode noise variances q_k.
std::vector<double> noise_variances(const Config& cfg, const std::vector<Mode>& modes);

/// b = -nu |k|^2 y - B_n(y, y) (terms dropped per drift mode),
/// sigma = diag(sqrt(2 q_k)).
CoefficientModel build_coefficients(const Config& cfg);

/// The space triple with X-weights |k|^2.
SpaceTriple triple(const Config& cfg);

/// Constants under which the shipped checkers apply: N(y) = nu |y|_X^2,
/// gamma = 2, gamma' = 4, lambda1 = 0, lambda2 = 2 nu, lambda3 = 2 C_B,
/// lambda4 = sum 2 q_k; V = 1 + |y|^2, Theta = 2 nu |y|_X^2, C0 = sum 2 q_k,
/// M0 = 4 max q_k.
struct Constants {
  NFunction gauge;
  AssumptionParams params;
  LyapunovData lyapunov;
  nlohmann::json to_json() const;
};
Constants constants(const Config& cfg);

struct EnergyReport {
  std::vector<double> times;
  std::vector<double> lhs;   // E|x(t)|^2 + 2 nu E int_0^t |x|_X^2 ds
  std::vector<double> rhs;   // |x0|^2 + t sum 2 q_k
  std::vector<double> standard_error;
  std::vector<double> slack;  // time-discretization allowance, reported separately
  bool equality = false;      // noise-only mode: two-sided test
  Verdict verdict = Verdict::kIndeterminate;

  nlohmann::json to_json() const;
};

/// Energy inequality within 3 standard errors plus slack; with the drift
/// switched off the identity E|x(t)|^2 = |x0|^2 + t sum 2 q_k is tested
/// two-sided.
EnergyReport energy_check(const PathEnsemble& ens, const Config& cfg);

}  // namespace fpk::snse
