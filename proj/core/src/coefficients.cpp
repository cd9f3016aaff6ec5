#include "fpk/coefficients.hpp"

#include <cmath>
#include <numbers>

#include "fpk/error.hpp"
#include "fpk/rng.hpp"

namespace fpk {

CoefficientModel::CoefficientModel(std::string name, std::size_t dim, std::size_t noise_dim,
                                   double horizon, DriftFn drift, SigmaFn sigma,
                                   bool time_homogeneous)
    : name_(std::move(name)),
      dim_(dim),
      noise_dim_(noise_dim),
      horizon_(horizon),
      drift_(std::move(drift)),
      sigma_(std::move(sigma)),
      time_homogeneous_(time_homogeneous) {
  if (dim_ == 0 || noise_dim_ == 0) throw DimensionError("model needs n >= 1 and m >= 1");
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw Error("horizon T must be positive");
}

void CoefficientModel::check_args(double t, ConstVecRef y) const {
  if (!(t >= -1e-12 * horizon_ && t <= horizon_ * (1.0 + 1e-12))) {
    throw EvaluationError(name_ + ": time " + std::to_string(t) + " outside [0, " +
                          std::to_string(horizon_) + "]");
  }
  if (static_cast<std::size_t>(y.size()) != dim_) {
    throw DimensionError(name_ + ": state has dimension " + std::to_string(y.size()) +
                         ", model dimension is " + std::to_string(dim_));
  }
}

void CoefficientModel::drift(double t, ConstVecRef y, VecRef out) const {
  check_args(t, y);
  drift_(t, y, out);
  if (!out.allFinite()) throw EvaluationError(name_ + ": non-finite drift");
}

Vector CoefficientModel::drift(double t, ConstVecRef y) const {
  Vector out(static_cast<Eigen::Index>(dim_));
  drift(t, y, out);
  return out;
}

void CoefficientModel::sigma(double t, ConstVecRef y, MatRef out) const {
  check_args(t, y);
  sigma_(t, y, out);
  if (!out.allFinite()) throw EvaluationError(name_ + ": non-finite sigma");
}

Matrix CoefficientModel::sigma(double t, ConstVecRef y) const {
  Matrix out(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(noise_dim_));
  sigma(t, y, out);
  return out;
}

CoefficientModel CoefficientModel::with_horizon(double horizon) const {
  return CoefficientModel(name_, dim_, noise_dim_, horizon, drift_, sigma_, time_homogeneous_);
}

void diffusion_matrix(const CoefficientModel& model, double t, ConstVecRef y, MatRef sigma_scratch,
                      MatRef out) {
  model.sigma(t, y, sigma_scratch);
  out.noalias() = 0.5 * sigma_scratch * sigma_scratch.transpose();
}

Matrix diffusion_matrix(const CoefficientModel& model, double t, ConstVecRef y) {
  const Matrix s = model.sigma(t, y);
  return 0.5 * s * s.transpose();
}

double generator(const CoefficientModel& model, double t, ConstVecRef y, ConstVecRef grad,
                 ConstMatRef hess) {
  const Matrix a = diffusion_matrix(model, t, y);
  const Vector b = model.drift(t, y);
  return (a.array() * hess.array()).sum() + b.dot(grad);
}

LyapunovData quadratic_lyapunov(std::function<double(ConstVecRef)> theta, double C0, double M0,
                                std::string theta_name) {
  LyapunovData l;
  l.name = "V=1+|y|^2, Theta=" + theta_name;
  l.value = [](ConstVecRef y) { return 1.0 + y.squaredNorm(); };
  l.gradient = [](ConstVecRef y) -> Vector { return 2.0 * y; };
  l.hessian = [](ConstVecRef y) -> Matrix {
    return 2.0 * Matrix::Identity(y.size(), y.size());
  };
  l.theta = std::move(theta);
  l.C0 = C0;
  l.M0 = M0;
  return l;
}

double lyapunov_w(const LyapunovData& lyap, ConstVecRef x0, int k, std::size_t n_max) {
  if (k < 1) throw Error("W_k needs k >= 1");
  const std::size_t limit = std::min<std::size_t>(n_max, static_cast<std::size_t>(x0.size()));
  double w = 0.0;
  for (std::size_t n = 1; n <= limit; ++n) {
    w = std::max(w, std::pow(lyap.value(x0.head(static_cast<Eigen::Index>(n))), k));
  }
  return w;
}

void AssumptionParams::validate() const {
  if (!(lambda1 >= 0.0)) throw Error("lambda1 must be >= 0");
  if (!(lambda2 > 0.0 && lambda3 > 0.0 && lambda4 > 0.0)) {
    throw Error("lambda2, lambda3, lambda4 must be > 0");
  }
  if (!(gamma > 1.0 && gamma_prime >= gamma)) throw Error("need gamma' >= gamma > 1");
}

AssumptionParams AssumptionParams::from_json(const nlohmann::json& j) {
  AssumptionParams p;
  p.lambda1 = j.value("lambda1", p.lambda1);
  p.lambda2 = j.value("lambda2", p.lambda2);
  p.lambda3 = j.value("lambda3", p.lambda3);
  p.lambda4 = j.value("lambda4", p.lambda4);
  p.gamma = j.value("gamma", p.gamma);
  p.gamma_prime = j.value("gamma_prime", p.gamma_prime);
  if (j.contains("envelopes")) {
    for (const auto& e : j.at("envelopes")) {
      GrowthEnvelope g;
      g.C = e.value("C", 0.0);
      g.k = e.value("k", 0.0);
      // kappa(s) = kappa0 / (1 + s): bounded, nonnegative, vanishing at infinity.
      const double kappa0 = e.value("kappa0", 0.0);
      g.kappa = [kappa0](double s) { return kappa0 / (1.0 + s); };
      p.envelopes.push_back(g);
    }
  }
  p.validate();
  return p;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass:
      return "pass";
    case Verdict::kFail:
      return "fail";
    case Verdict::kIndeterminate:
      return "indeterminate";
  }
  return "indeterminate";
}

nlohmann::json CheckReport::to_json() const {
  std::vector<double> y(worst_case.y.data(), worst_case.y.data() + worst_case.y.size());
  return {{"name", name},
          {"verdict", to_string(verdict)},
          {"worst_case", {{"t", worst_case.t}, {"y", y}, {"margin", worst_case.margin}}},
          {"samples_used", samples_used}};
}

double SamplePlan::time(std::size_t i, double horizon) const {
  const CounterRng rng(seed, Stream::kSamplePlan);
  return horizon * (1.0 - rng.uniform_pair(i, 0xFFFFFFFFu).first);
}

double SamplePlan::uniform(std::size_t i, std::uint32_t slot) const {
  const CounterRng rng(seed, Stream::kSamplePlan);
  return 1.0 - rng.uniform_pair(i, 0xFFFFFF00u + slot).first;
}

Vector SamplePlan::state(std::size_t i, std::size_t n) const {
  const CounterRng rng(seed, Stream::kSamplePlan);
  Vector u(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; j += 2) {
    const auto [z0, z1] = rng.normal_pair(i, static_cast<std::uint32_t>(j / 2), 1);
    u[static_cast<Eigen::Index>(j)] = z0;
    if (j + 1 < n) u[static_cast<Eigen::Index>(j + 1)] = z1;
  }
  const double norm = u.norm();
  if (norm == 0.0) return u;
  const double r = radius * (1.0 - rng.uniform_pair(i, 0xFFFFFFFEu).first);
  return u * (r / norm);
}

SamplePlan SamplePlan::from_json(const nlohmann::json& j) {
  SamplePlan p;
  p.seed = j.value("seed", p.seed);
  p.samples = j.value("samples", p.samples);
  p.radius = j.value("radius", p.radius);
  if (j.contains("truncations")) p.truncations = j.at("truncations").get<std::vector<std::size_t>>();
  return p;
}

namespace models {

namespace {

CoefficientModel::SigmaFn isotropic(double sigma) {
  return [sigma](double, ConstVecRef, MatRef out) {
    out.setZero();
    out.diagonal().setConstant(sigma);
  };
}

}  // namespace

CoefficientModel zero(std::size_t n, double horizon) {
  return CoefficientModel(
      "zero", n, n, horizon, [](double, ConstVecRef, VecRef out) { out.setZero(); },
      [](double, ConstVecRef, MatRef out) { out.setZero(); }, true);
}

CoefficientModel ornstein_uhlenbeck(double theta, double sigma, double horizon, std::size_t n) {
  return CoefficientModel(
      "ou", n, n, horizon, [theta](double, ConstVecRef y, VecRef out) { out = -theta * y; },
      isotropic(sigma), true);
}

CoefficientModel shifted_ou(double theta, double shift, double sigma, double horizon,
                            std::size_t n) {
  return CoefficientModel(
      "shifted_ou", n, n, horizon,
      [theta, shift](double, ConstVecRef y, VecRef out) {
        out = -theta * y;
        out.array() += shift;
      },
      isotropic(sigma), true);
}

CoefficientModel constant_drift(Vector drift, double sigma, double horizon) {
  const auto n = static_cast<std::size_t>(drift.size());
  return CoefficientModel(
      "constant_drift", n, n, horizon, [drift](double, ConstVecRef, VecRef out) { out = drift; },
      isotropic(sigma), true);
}

CoefficientModel diagonal_ou(std::vector<double> rates, double sigma, double horizon) {
  const auto n = rates.size();
  const Eigen::Map<const Vector> r(rates.data(), static_cast<Eigen::Index>(n));
  Vector rv = r;
  return CoefficientModel(
      "diagonal_ou", n, n, horizon,
      [rv](double, ConstVecRef y, VecRef out) { out = -(rv.array() * y.array()).matrix(); },
      isotropic(sigma), true);
}

CoefficientModel coupled_decay(std::size_t n, double coupling, double sigma, double horizon) {
  Vector w(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const double jj = static_cast<double>(j + 1);
    w[static_cast<Eigen::Index>(j)] = 1.0 / (jj * jj);
  }
  return CoefficientModel(
      "coupled_decay", n, n, horizon,
      [w, coupling](double, ConstVecRef y, VecRef out) {
        const double total = w.dot(y);
        out = -y;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
          out[i] += coupling * (total - w[i] * y[i]);
        }
      },
      isotropic(sigma), true);
}

CoefficientModel cubic(std::size_t n, double sigma, double horizon) {
  return CoefficientModel(
      "cubic", n, n, horizon,
      [](double, ConstVecRef y, VecRef out) { out = y.array().cube().matrix(); },
      isotropic(sigma), true);
}

CoefficientModel constant_noise(Matrix sigma, double horizon) {
  const auto n = static_cast<std::size_t>(sigma.rows());
  const auto m = static_cast<std::size_t>(sigma.cols());
  return CoefficientModel(
      "constant_noise", n, m, horizon, [](double, ConstVecRef, VecRef out) { out.setZero(); },
      [sigma](double, ConstVecRef, MatRef out) { out = sigma; }, true);
}

CoefficientModel from_json(const nlohmann::json& j, double horizon) {
  const auto name = j.at("name").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  const auto n = params.value("n", std::size_t{1});
  if (name == "zero") return zero(n, horizon);
  if (name == "ou") {
    return ornstein_uhlenbeck(params.value("theta", 1.0), params.value("sigma", std::numbers::sqrt2),
                              horizon, n);
  }
  if (name == "shifted_ou") {
    return shifted_ou(params.value("theta", 1.0), params.value("shift", 0.0),
                      params.value("sigma", std::numbers::sqrt2), horizon, n);
  }
  if (name == "constant_drift") {
    const auto c = params.at("drift").get<std::vector<double>>();
    return constant_drift(Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size())),
                          params.value("sigma", 0.0), horizon);
  }
  if (name == "diagonal_ou") {
    return diagonal_ou(params.at("rates").get<std::vector<double>>(), params.value("sigma", 1.0),
                       horizon);
  }
  if (name == "coupled_decay") {
    return coupled_decay(n, params.value("coupling", 0.5), params.value("sigma", 1.0), horizon);
  }
  if (name == "cubic") return cubic(n, params.value("sigma", 0.01), horizon);
  throw ConfigError("unknown model '" + name + "'");
}

}  // namespace models

}  // namespace fpk
