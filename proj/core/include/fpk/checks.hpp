#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fpk/coefficients.hpp"
#include "fpk/space.hpp"
#include "fpk/test_functions.hpp"

namespace fpk {

/// Sampling-based certification of the structural assumptions. A pass means
/// no violation was found among the planned samples; it is not a proof.
namespace checks {

constexpr double kInequalityTol = 1e-9;
constexpr double kEigenTol = 1e-10;
constexpr double kSymmetryTol = 1e-12;

using DiffusionFn = std::function<Matrix(double, ConstVecRef)>;

/// A symmetric to `sym_tol` and min eigenvalue >= -eig_tol.
CheckReport symmetry_psd(const CoefficientModel& model, const SamplePlan& plan,
                         double eig_tol = kEigenTol, double sym_tol = kSymmetryTol);
/// Same check on an arbitrary matrix field A(t, y) on H_n.
CheckReport symmetry_psd(const DiffusionFn& a, std::size_t n, double horizon,
                         const SamplePlan& plan, double eig_tol = kEigenTol,
                         double sym_tol = kSymmetryTol);

/// Coercivity: <b(t, v), v> <= -N(v) + lambda1 (1 + |v|_H^2).
CheckReport coercivity(const CoefficientModel& model, const NFunction& gauge,
                       const AssumptionParams& params, const SamplePlan& plan,
                       double tol = kInequalityTol);

/// Growth: |b|_{X*}^gamma <= lambda2 N(y) + lambda3 (1 + |y|_H^gamma') and
/// |sigma|_HS^2 <= lambda4 (1 + |y|_H^2). The margin is reported relative
/// to the right-hand side so that large states are comparable.
CheckReport growth(const CoefficientModel& model, const SpaceTriple& triple,
                   const NFunction& gauge, const AssumptionParams& params,
                   const SamplePlan& plan, double tol = kInequalityTol);

/// Lyapunov pair: LV <= C0 V - Theta and grad V^T A grad V <= M0 V^2.
CheckReport lyapunov(const CoefficientModel& model, const LyapunovData& lyap,
                     const SamplePlan& plan, double tol = kInequalityTol);

/// Coefficient envelope: |a^{ij}| + |b^i| <= C_i V^{k_i} (1 + kappa_i(Theta) Theta) for j <= i.
CheckReport coefficient_envelope(const CoefficientModel& model, const LyapunovData& lyap,
                                 const AssumptionParams& params, const SamplePlan& plan,
                                 double tol = kInequalityTol);

struct NClassResult {
  CheckReport report;
  std::vector<std::size_t> truncations;
  std::vector<double> constants;  // empirical C_n per truncation
  nlohmann::json to_json() const;
};

/// Gauge class check: estimates C_n = max N(v)/|v|^p on
/// samples, checks N(0) = 0, N(v) > 0 for v != 0, and N(c v) <= c^rho N(v).
/// Compactness of sublevel sets is not checkable and is not attempted.
NClassResult n_class(const NFunction& gauge, const SamplePlan& plan, double tol = kInequalityTol);

/// Demicontinuity smoke test: gaps |<b(t, y_k) - b(t, y), v>| and
/// |sigma^T(t, y_k) v - sigma^T(t, y) v| along y_k = y + 2^-k w.
struct DemicontinuityTrace {
  std::vector<double> drift_gaps;
  std::vector<double> noise_gaps;
  /// Both tails non-increasing over the last half of the sequence and the
  /// final gaps below `final_tol`.
  bool decreasing(double final_tol = 1e-6) const;
};
DemicontinuityTrace demicontinuity(const CoefficientModel& model, double t, ConstVecRef y,
                                   ConstVecRef w, ConstVecRef v, std::size_t terms = 30);

/// Time equicontinuity as a finite modulus-of-continuity scan over time: max over the planned
/// states and over grid-adjacent times of |A(t+h, y) - A(t, y)|_max and
/// |b(t+h, y) - b(t, y)|_max for the time grid with `steps` intervals.
double time_modulus(const CoefficientModel& model, const SamplePlan& plan, std::size_t steps);

}  // namespace checks

}  // namespace fpk
