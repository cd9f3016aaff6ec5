#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/linalg.hpp"

namespace fpk {

/// Drift b(t, y) in X* and noise sigma(t, y): U_m -> H_n on the truncated
/// space H_n. Evaluators write into caller storage and must be pure.
class CoefficientModel {
 public:
  using DriftFn = std::function<void(double, ConstVecRef, VecRef)>;
  using SigmaFn = std::function<void(double, ConstVecRef, MatRef)>;

  CoefficientModel(std::string name, std::size_t dim, std::size_t noise_dim, double horizon,
                   DriftFn drift, SigmaFn sigma, bool time_homogeneous = false);

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t noise_dim() const noexcept { return noise_dim_; }
  double horizon() const noexcept { return horizon_; }
  bool time_homogeneous() const noexcept { return time_homogeneous_; }

  /// Throws EvaluationError outside [0, T] or on non-finite output.
  void drift(double t, ConstVecRef y, VecRef out) const;
  Vector drift(double t, ConstVecRef y) const;
  void sigma(double t, ConstVecRef y, MatRef out) const;
  Matrix sigma(double t, ConstVecRef y) const;

  /// Same model on a different horizon (evaluators unchanged).
  CoefficientModel with_horizon(double horizon) const;

 private:
  void check_args(double t, ConstVecRef y) const;

  std::string name_;
  std::size_t dim_;
  std::size_t noise_dim_;
  double horizon_;
  DriftFn drift_;
  SigmaFn sigma_;
  bool time_homogeneous_;
};

/// A_n(t, y) = 1/2 S S^T with S = sigma(t, y).
Matrix diffusion_matrix(const CoefficientModel& model, double t, ConstVecRef y);
void diffusion_matrix(const CoefficientModel& model, double t, ConstVecRef y, MatRef sigma_scratch,
                      MatRef out);

/// L phi(t, y) for a smooth phi given by value/gradient/Hessian at y.
double generator(const CoefficientModel& model, double t, ConstVecRef y, ConstVecRef grad,
                 ConstMatRef hess);

/// Lyapunov pair (V, Theta) with the constants of LV <= C0 V - Theta and
/// grad V^T A grad V <= M0 V^2.
struct LyapunovData {
  std::string name;
  std::function<double(ConstVecRef)> value;
  std::function<Vector(ConstVecRef)> gradient;
  std::function<Matrix(ConstVecRef)> hessian;
  std::function<double(ConstVecRef)> theta;
  double C0 = 0.0;
  double M0 = 0.0;
};

/// V(y) = 1 + |y|_H^2 with a user-supplied Theta.
LyapunovData quadratic_lyapunov(std::function<double(ConstVecRef)> theta, double C0, double M0,
                                std::string theta_name = "theta");

/// W_k = max over n <= n_max of V(Pi_n x0)^k.
double lyapunov_w(const LyapunovData& lyap, ConstVecRef x0, int k, std::size_t n_max);

/// Growth envelope |a^{ij}| + |b^i| <= C V^k (1 + kappa(Theta) Theta) for one
/// component i.
struct GrowthEnvelope {
  double C = 0.0;
  double k = 0.0;
  std::function<double(double)> kappa = [](double) { return 0.0; };
};

struct AssumptionParams {
  double lambda1 = 0.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double lambda4 = 1.0;
  double gamma = 2.0;
  double gamma_prime = 2.0;
  std::vector<GrowthEnvelope> envelopes;  // per component i; the last entry repeats

  /// Throws Error unless gamma' >= gamma > 1 and lambda2..4 > 0, lambda1 >= 0.
  void validate() const;
  static AssumptionParams from_json(const nlohmann::json& j);
};

enum class Verdict { kPass, kFail, kIndeterminate };
std::string to_string(Verdict v);

/// Outcome of one sampling-based certification. margin = rhs - lhs of the
/// checked inequality at the worst sample; pass iff margin >= -tolerance
/// everywhere.
struct CheckReport {
  struct WorstCase {
    double t = 0.0;
    Vector y;
    double margin = 0.0;
  };

  std::string name;
  Verdict verdict = Verdict::kIndeterminate;
  WorstCase worst_case;
  std::size_t samples_used = 0;

  bool passed() const noexcept { return verdict == Verdict::kPass; }
  nlohmann::json to_json() const;
};

/// Deterministic draws of (t, y): t uniform on [0, T]; y = r u with u
/// uniform on the unit sphere of R^n and r uniform on [0, radius].
struct SamplePlan {
  std::uint64_t seed = 1;
  std::size_t samples = 1000;
  double radius = 10.0;
  std::vector<std::size_t> truncations;  // used by checks::n_class

  double time(std::size_t i, double horizon) const;
  Vector state(std::size_t i, std::size_t n) const;
  /// Uniform draw in [0, 1) at slot `slot` of sample i (for auxiliary scalars).
  double uniform(std::size_t i, std::uint32_t slot) const;

  static SamplePlan from_json(const nlohmann::json& j);
};

namespace models {

CoefficientModel zero(std::size_t n, double horizon);
/// dX = -theta X dt + sigma dW in every coordinate.
CoefficientModel ornstein_uhlenbeck(double theta, double sigma, double horizon, std::size_t n = 1);
/// dX = (-theta X + shift) dt + sigma dW.
CoefficientModel shifted_ou(double theta, double shift, double sigma, double horizon,
                            std::size_t n = 1);
/// Constant drift, constant isotropic noise.
CoefficientModel constant_drift(Vector drift, double sigma, double horizon);
/// b_i = -rates_i y_i, independent noise of size sigma.
CoefficientModel diagonal_ou(std::vector<double> rates, double sigma, double horizon);
/// b_i = -y_i + c sum_{j != i} y_j / j^2 (1-based j), isotropic noise.
CoefficientModel coupled_decay(std::size_t n, double coupling, double sigma, double horizon);
/// b = y^3 componentwise with small additive noise; blows up in finite time.
CoefficientModel cubic(std::size_t n, double sigma, double horizon);
/// sigma = [[1, 1], [0, 1]]-style constant matrix noise with zero drift.
CoefficientModel constant_noise(Matrix sigma, double horizon);

/// Registry: {"name": "...", "params": {...}}.
CoefficientModel from_json(const nlohmann::json& j, double horizon);

}  // namespace models

}  // namespace fpk
