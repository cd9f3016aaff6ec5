#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/coefficients.hpp"
#include "fpk/measures.hpp"
#include "fpk/test_functions.hpp"

namespace fpk {

struct SimulationSpec {
  std::size_t steps = 100;        // Euler-Maruyama steps on [0, T]
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  std::size_t record_every = 1;   // store every r-th state; steps % r == 0
  double guard = 1e8;             // |y|_H above this aborts the run

  std::size_t nodes() const noexcept { return steps / record_every + 1; }
  nlohmann::json to_json() const;
  static SimulationSpec from_json(const nlohmann::json& j);
};

/// M sampled paths of the truncated diffusion, stored at the recorded nodes.
/// States are columns of an n x (nodes * paths) matrix, node-major, so each
/// time marginal is one contiguous block.
struct PathEnsemble {
  std::size_t dim = 0;
  std::size_t paths = 0;
  std::vector<double> times;
  Matrix states;
  Vector initial_point;
  std::uint64_t seed = 0;
  std::string model_name;
  std::size_t steps = 0;
  double dt = 0.0;
  /// max over paths of int |b(s, x(s))|_H ds + int |sigma(s, x(s))|_HS^2 ds.
  double max_path_integral = 0.0;

  std::size_t nodes() const noexcept { return times.size(); }
  auto state(std::size_t path, std::size_t node) const {
    return states.col(static_cast<Eigen::Index>(node * paths + path));
  }
  auto node_block(std::size_t node) const {
    return states.middleCols(static_cast<Eigen::Index>(node * paths),
                             static_cast<Eigen::Index>(paths));
  }
  std::size_t node_at(double t) const;
};

/// X_{k+1} = X_k + b(t_k, X_k) dt + sigma(t_k, X_k) sqrt(dt) xi_k. The normal
/// for (path p, step k, noise coordinate j) is a pure function of
/// (seed, p, k, j), so the ensemble is bit-reproducible and the first
/// coordinates see identical noise across truncation levels.
PathEnsemble simulate_em(const CoefficientModel& model, ConstVecRef x0, const SimulationSpec& spec);

/// Equally weighted empirical law of the paths at grid time t.
EmpiricalMeasure marginal(const PathEnsemble& ens, double t);
/// All recorded marginals as a flow.
MarginalFlow marginal_flow(const PathEnsemble& ens);

/// g(x|[0,s]) = prod_j f_j(x(t_j)) with every t_j <= s.
struct PathFunctional {
  std::string name;
  std::vector<std::pair<FinitelyBasedFunction, double>> factors;

  double latest_time() const;
  double eval(const PathEnsemble& ens, std::size_t path) const;
};

struct MartingaleStat {
  std::string f;
  double s = 0.0;
  double t = 0.0;
  std::string g;
  double statistic = 0.0;
  double standard_error = 0.0;
  double z = 0.0;
  std::size_t paths = 0;

  nlohmann::json to_json() const;
};

/// Lf(t_k, x_p(t_k)) for every path p (rows) and node k (columns).
Matrix generator_along_paths(const PathEnsemble& ens, const FinitelyBasedFunction& f,
                             const CoefficientModel& model);

/// Monte-Carlo estimate of E[(M^f(t) - M^f(s)) g] for each g, with the
/// time integral of Lf by trapezoid on the ensemble grid.
std::vector<MartingaleStat> martingale_test(const PathEnsemble& ens, const FinitelyBasedFunction& f,
                                            const CoefficientModel& model, double s, double t,
                                            const std::vector<PathFunctional>& conditions);
/// Same, reusing a precomputed generator_along_paths matrix.
std::vector<MartingaleStat> martingale_test(const PathEnsemble& ens, const FinitelyBasedFunction& f,
                                            const Matrix& generator_values, double s, double t,
                                            const std::vector<PathFunctional>& conditions);

/// One (f, g, s, t) combination of a martingale suite.
struct MartingaleCase {
  std::size_t f = 0;  // index into the suite's test functions
  PathFunctional g;
  double s = 0.0;
  double t = 0.0;
};

/// Runs every case, computing each Lf matrix once.
std::vector<MartingaleStat> martingale_suite(const PathEnsemble& ens, const CoefficientModel& model,
                                             const TestFamily& functions,
                                             const std::vector<MartingaleCase>& cases);

/// Monte-Carlo value of E[sup_t |x(t)|^{2q} + int |x(t)|^{2(q-1)} N(x(t)) dt]
/// (sup over nodes, trapezoid in time). Non-finite results come back as +inf.
double energy_estimate(const PathEnsemble& ens, double q, const NFunction& gauge);

}  // namespace fpk
