#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/coefficients.hpp"
#include "fpk/ensemble.hpp"
#include "fpk/measures.hpp"
#include "fpk/test_functions.hpp"

namespace fpk {

/// max over the family of |int f d mu - int f d nu|.
double marginal_distance(const Measure& mu, const Measure& nu, const TestFamily& family);

/// marginal_distance at every node of two flows on the same time grid.
std::vector<double> flow_distances(const MarginalFlow& a, const MarginalFlow& b,
                                   const TestFamily& family);

/// M_k = k (C0 + (k - 1) M0).
double lyapunov_M(double C0, double M0, int k);
/// N_k = M_k e^{M_k} + 1.
double lyapunov_N(double C0, double M0, int k);

struct LyapunovLedger {
  int k = 1;
  double M_k = 0.0;
  double N_k = 0.0;
  double W_k = 0.0;
  double rhs = 0.0;            // N_k W_k
  std::vector<double> times;
  std::vector<double> lhs;     // int V^k d mu_t + k int_0^t int V^{k-1} Theta d mu_s ds
  double finite_mass = 1.0;    // min over nodes of the mass on which V is finite
  Verdict verdict = Verdict::kIndeterminate;

  double max_lhs() const;
  nlohmann::json to_json() const;
};

/// Moment bound ledger; pass iff lhs(t) <= rhs (1 + 1e-6) at every node and
/// V is finite almost surely at every node.
LyapunovLedger lyapunov_bound_check(const MarginalFlow& flow, const LyapunovData& lyap, int k,
                                    ConstVecRef x0, std::size_t n_max);

/// int_0^T int (|A(t, y)| + |<b(t, y), y>|) / (1 + |y|_H)^2 d mu_t dt with the
/// operator norm of A by power iteration (Frobenius norm when requested).
double s2_integrability(const MarginalFlow& flow, const CoefficientModel& model,
                        bool frobenius = false);

/// Largest singular value of a square matrix by power iteration on A^T A.
double operator_norm(ConstMatRef a, double tol = 1e-10, std::size_t max_iters = 1000);

struct ConvergenceTable {
  struct Row {
    double t = 0.0;
    std::size_t n = 0;
    std::size_t n_other = 0;
    double distance = 0.0;
  };

  std::vector<std::size_t> levels;    // ascending
  std::vector<double> times;
  std::vector<Row> rows;              // all level pairs at every time
  std::vector<double> sup_to_finest;  // per level except the finest
  /// sup_to_finest strictly decreasing in n.
  bool decreasing = false;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Cross-level family distances. Requires at least two levels and family
/// base dimensions no larger than the smallest level.
ConvergenceTable galerkin_convergence(const std::map<std::size_t, MarginalFlow>& flows,
                                      const TestFamily& family, const std::vector<double>& times);

struct SuperpositionReport {
  std::vector<double> times;
  std::vector<double> distances;
  double tolerance = 0.0;
  Verdict verdict = Verdict::kIndeterminate;
  std::size_t family_size = 0;
  std::vector<LyapunovLedger> lyapunov;
  std::optional<double> s2;
  std::optional<ConvergenceTable> convergence;

  double sup_distance() const;
  nlohmann::json to_json() const;
};

/// Marginal coincidence of a flow and an ensemble on the same time grid;
/// pass iff the sup distance is <= tol.
SuperpositionReport verify_superposition(const MarginalFlow& flow, const PathEnsemble& ens,
                                         const TestFamily& family, double tol);

}  // namespace fpk
