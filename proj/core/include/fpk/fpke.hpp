#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/coefficients.hpp"
#include "fpk/ensemble.hpp"
#include "fpk/measures.hpp"
#include "fpk/test_functions.hpp"

namespace fpk {

struct GridSpec {
  std::vector<GridAxis> axes;   // one per dimension, n in {1, 2}
  std::size_t steps = 1000;     // outer steps on [0, T]
  std::size_t record_every = 1; // steps % record_every == 0
  double max_courant = 1.0;     // max |v| dt / h over all faces
  double theta = 0.5;           // 1/2 Crank-Nicolson, 1 implicit Euler
  double boundary_mass_tol = 1e-8;
  std::size_t boundary_cells = 2;  // width of the monitored boundary strip

  nlohmann::json to_json() const;
  static GridSpec from_json(const nlohmann::json& j);
};

/// Finite-volume solution of d/dt mu = L* mu started from a Gaussian
/// mollification (standard deviation two cells) of the Dirac at Pi_n x0.
///
/// Fluxes J = b rho - d(a rho) use Scharfetter-Gummel exponential fitting on
/// the effective velocity b - da/dy. Time stepping is the theta scheme with
/// an implicit part solved line by line by the Thomas algorithm (Strang
/// splitting across axes for n = 2). Each outer step is split into the fewest
/// equal substeps for which the explicit part is entrywise nonnegative, so
/// mass is conserved and the density stays nonnegative without clipping.
/// theta = 1/2 is second order in time. For n = 2 the diffusion matrix must be
/// diagonal.
///
/// Throws DomainTooSmallError when the boundary strip carries more than
/// boundary_mass_tol and StepSizeError when the Courant bound is exceeded.
MarginalFlow solve_fpke_grid(const CoefficientModel& model, ConstVecRef x0, const GridSpec& grid);

/// Empirical marginals of an Euler-Maruyama ensemble of the same model.
MarginalFlow solve_fpke_particle(const CoefficientModel& model, ConstVecRef x0,
                                 const SimulationSpec& spec);

/// int Lf(t_k, .) d mu_{t_k} at every node.
std::vector<double> generator_integrals(const MarginalFlow& flow, const FinitelyBasedFunction& f,
                                        const CoefficientModel& model);

/// |int f d mu_t - f(Pi_n x0) - int_0^t int Lf d mu_s ds| at every node
/// (trapezoid in time on the flow grid).
std::vector<double> weak_residuals(const MarginalFlow& flow, const FinitelyBasedFunction& f,
                                   const CoefficientModel& model);
double weak_residual(const MarginalFlow& flow, const FinitelyBasedFunction& f,
                     const CoefficientModel& model, double t);

/// max over family members and adjacent nodes of |int f d mu_{k+1} - int f d mu_k|.
double narrow_continuity_modulus(const MarginalFlow& flow, const TestFamily& family);

/// int_0^T int sum_ij |a^{ij}| + sum_i |b^i| d mu_t dt; a non-finite value
/// disqualifies the flow as a probability solution.
double coefficient_integrability(const MarginalFlow& flow, const CoefficientModel& model);

}  // namespace fpk
