#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/checks.hpp"
#include "fpk/coefficients.hpp"
#include "fpk/ensemble.hpp"
#include "fpk/fpke.hpp"
#include "fpk/measures.hpp"
#include "fpk/superposition.hpp"

namespace fpk {

/// Coefficients b(t, y, rho), sigma(t, y, rho) whose measure dependence
/// factors through a finite vector of declared statistics s(rho).
class MeasureDependentModel {
 public:
  using StatisticsFn = std::function<Vector(const Measure&)>;
  using DriftFn = std::function<void(double, ConstVecRef, ConstVecRef, VecRef)>;
  using SigmaFn = std::function<void(double, ConstVecRef, ConstVecRef, MatRef)>;

  MeasureDependentModel(std::string name, std::size_t dim, std::size_t noise_dim, double horizon,
                        std::vector<std::string> statistic_names, StatisticsFn statistics,
                        DriftFn drift, SigmaFn sigma);

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t noise_dim() const noexcept { return noise_dim_; }
  double horizon() const noexcept { return horizon_; }
  const std::vector<std::string>& statistic_names() const noexcept { return statistic_names_; }

  /// Throws EvaluationError on non-finite statistics.
  Vector statistics(const Measure& rho) const;
  void drift(double t, ConstVecRef y, ConstVecRef stats, VecRef out) const;
  void sigma(double t, ConstVecRef y, ConstVecRef stats, MatRef out) const;

  /// Linear model with the measure argument fixed at rho.
  CoefficientModel at_measure(const Measure& rho) const;

 private:
  std::string name_;
  std::size_t dim_;
  std::size_t noise_dim_;
  double horizon_;
  std::vector<std::string> statistic_names_;
  StatisticsFn statistics_;
  DriftFn drift_;
  SigmaFn sigma_;
};

/// b(t, y) = b(t, y, mu_t), sigma(t, y) = sigma(t, y, mu_t) with mu_t the
/// nearest node of the flow. Evaluation outside the flow's time range throws.
CoefficientModel freeze(const MeasureDependentModel& model, const MarginalFlow& flow);

/// Flow of point masses at Pi_n x0 on the ensemble time grid of `spec`.
MarginalFlow dirac_flow(ConstVecRef x0, std::size_t n, double horizon, const SimulationSpec& spec);

struct PicardResult {
  MarginalFlow flow;
  PathEnsemble ensemble;
  MarginalFlow previous_flow;       // the iterate the final one was frozen at
  std::size_t iterations = 0;       // number of re-freezes performed
  bool converged = false;
  std::vector<double> distance_trace;

  nlohmann::json to_json() const;
  std::string trace_csv() const;
};

/// Fixed-point iteration on the marginal flow. The first ensemble is the
/// model frozen at the Dirac flow; each iteration re-freezes at the latest
/// marginals and resimulates with the same seed, so the map is deterministic.
/// Stops at the first iterate within `tol` (sup over t of the family
/// distance) of its predecessor. A DivergenceError names the iterate.
PicardResult solve_mkv_picard(const MeasureDependentModel& model, ConstVecRef x0,
                              const SimulationSpec& spec, std::size_t max_iters, double tol,
                              const TestFamily& family);

/// M coupled particles; the statistics are recomputed from the current
/// ensemble at every step. Uses the same noise indexing as simulate_em.
PathEnsemble solve_mkv_interacting(const MeasureDependentModel& model, ConstVecRef x0,
                                   const SimulationSpec& spec);

struct NonlinearReport {
  SuperpositionReport superposition;
  double integrability = 0.0;
  std::vector<MartingaleStat> martingale;
  double z_threshold = 4.0;
  Verdict verdict = Verdict::kIndeterminate;

  nlohmann::json to_json() const;
};

/// Marginal coincidence of (flow, ens) under the frozen model, integrability
/// of the frozen coefficients along the flow, and a martingale suite on the
/// frozen model.
NonlinearReport verify_nonlinear_superposition(const MeasureDependentModel& model,
                                               const MarginalFlow& flow, const PathEnsemble& ens,
                                               const TestFamily& family, double tol,
                                               const TestFamily& martingale_functions = {},
                                               const std::vector<MartingaleCase>& cases = {});

namespace checks {

/// Coercivity, growth and symmetry/PSD with the model frozen at every sampled
/// measure; one set of constants must serve all of them.
CheckReport measure_uniform(const MeasureDependentModel& model,
                            const std::vector<Measure>& measures, const SpaceTriple& triple,
                            const NFunction& gauge, const AssumptionParams& params,
                            const SamplePlan& plan);

}  // namespace checks

namespace models {

/// dX = -(X - a E[X]) dt + sigma dW in every coordinate.
MeasureDependentModel mean_field_ou(double a, double sigma, double horizon, std::size_t n = 1);
/// Drift -y, noise sqrt(1 + var(rho^1)) I.
MeasureDependentModel variance_noise(double horizon, std::size_t n = 1);
/// b = y var(rho^1): fails any uniform bound when variances are unbounded.
MeasureDependentModel variance_drift(double sigma, double horizon, std::size_t n = 1);
/// Wraps a linear model; statistics are empty.
MeasureDependentModel measure_independent(const CoefficientModel& base);

MeasureDependentModel nonlinear_from_json(const nlohmann::json& j, double horizon);

}  // namespace models

}  // namespace fpk
