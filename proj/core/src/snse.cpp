#include "fpk/snse.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fpk/error.hpp"

namespace fpk::snse {

namespace {

using cplx = std::complex<double>;

// Coefficients of e^{+i theta} and e^{-i theta}.
struct Exponentials {
  cplx plus;
  cplx minus;
};

Exponentials expand(bool sine, bool derivative) {
  const cplx half(0.5, 0.0);
  const cplx ihalf(0.0, 0.5);
  if (!derivative) return sine ? Exponentials{-ihalf, ihalf} : Exponentials{half, half};
  // cos' = -sin, sin' = cos.
  return sine ? Exponentials{half, half} : Exponentials{ihalf, -ihalf};
}

// int_{[0, 2 pi)^2} T_a(k_a . x) T_b'(k_b . x) T_c(k_c . x) dx.
double triple_integral(const Mode& a, const Mode& b, const Mode& c) {
  const Exponentials ea = expand(a.sine, false);
  const Exponentials eb = expand(b.sine, true);
  const Exponentials ec = expand(c.sine, false);
  cplx total(0.0, 0.0);
  for (int s1 : {1, -1}) {
    for (int s2 : {1, -1}) {
      for (int s3 : {1, -1}) {
        if (s1 * a.k1 + s2 * b.k1 + s3 * c.k1 != 0) continue;
        if (s1 * a.k2 + s2 * b.k2 + s3 * c.k2 != 0) continue;
        total += (s1 > 0 ? ea.plus : ea.minus) * (s2 > 0 ? eb.plus : eb.minus) *
                 (s3 > 0 ? ec.plus : ec.minus);
      }
    }
  }
  return 4.0 * std::numbers::pi * std::numbers::pi * total.real();
}

// L^2 normalization of p_k trig(k . x): 1 / (pi sqrt(2) |k|).
double normalization(const Mode& m) {
  return 1.0 / (std::numbers::pi * std::numbers::sqrt2 * std::sqrt(double(m.k_squared())));
}

}  // namespace

void Config::validate() const {
  if (!(viscosity > 0.0) || !std::isfinite(viscosity)) throw ConfigError("viscosity must be > 0");
  if (k_max < 1) throw ConfigError("k_max must be >= 1");
  if (!(noise_amplitude >= 0.0) || !std::isfinite(noise_amplitude)) {
    throw ConfigError("noise amplitude must be finite and >= 0");
  }
  if (!std::isfinite(noise_decay)) throw ConfigError("noise decay must be finite");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
}

nlohmann::json Config::to_json() const {
  static const char* names[] = {"full", "linear", "none"};
  return {{"viscosity", viscosity},
          {"k_max", k_max},
          {"noise_amplitude", noise_amplitude},
          {"noise_decay", noise_decay},
          {"horizon", horizon},
          {"drift", names[static_cast<int>(drift)]}};
}

Config Config::from_json(const nlohmann::json& j) {
  Config c;
  c.viscosity = j.value("viscosity", c.viscosity);
  c.k_max = j.value("k_max", c.k_max);
  c.noise_amplitude = j.value("noise_amplitude", c.noise_amplitude);
  c.noise_decay = j.value("noise_decay", c.noise_decay);
  c.horizon = j.value("horizon", c.horizon);
  const std::string drift = j.value("drift", std::string("full"));
  if (drift == "full") {
    c.drift = DriftMode::kFull;
  } else if (drift == "linear") {
    c.drift = DriftMode::kLinear;
  } else if (drift == "none") {
    c.drift = DriftMode::kNone;
  } else {
    throw ConfigError("drift must be full, linear or none");
  }
  c.validate();
  return c;
}

std::vector<Mode> retained_modes(int k_max) {
  std::vector<Mode> modes;
  const int kk = k_max * k_max;
  for (int k1 = 0; k1 <= k_max; ++k1) {
    for (int k2 = -k_max; k2 <= k_max; ++k2) {
      const int sq = k1 * k1 + k2 * k2;
      if (sq == 0 || sq > kk) continue;
      if (k1 == 0 && k2 <= 0) continue;
      modes.push_back({k1, k2, false});
      modes.push_back({k1, k2, true});
    }
  }
  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.k_squared() != b.k_squared()) return a.k_squared() < b.k_squared();
    if (a.k1 != b.k1) return a.k1 < b.k1;
    if (a.k2 != b.k2) return a.k2 < b.k2;
    return !a.sine && b.sine;
  });
  return modes;
}

Galerkin::Galerkin(int k_max) : modes_(retained_modes(k_max)) {
  if (modes_.empty()) throw Error("SNSE Galerkin space has no modes");
  const std::size_t n = modes_.size();
  for (std::size_t a = 0; a < n; ++a) {
    const Mode& ma = modes_[a];
    const auto pa = ma.polarization();
    for (std::size_t b = 0; b < n; ++b) {
      const Mode& mb = modes_[b];
      const int advect = pa[0] * mb.k1 + pa[1] * mb.k2;
      if (advect == 0) continue;
      const auto pb = mb.polarization();
      for (std::size_t c = 0; c < n; ++c) {
        const Mode& mc = modes_[c];
        const auto pc = mc.polarization();
        const int align = pb[0] * pc[0] + pb[1] * pc[1];
        if (align == 0) continue;
        const double integral = triple_integral(ma, mb, mc);
        if (integral == 0.0) continue;
        const double value = normalization(ma) * normalization(mb) * normalization(mc) *
                             double(advect) * double(align) * integral;
        entries_.push_back({a, b, c, value});
      }
    }
  }
}

std::array<double, 2> Galerkin::basis(std::size_t alpha, double x1, double x2) const {
  const Mode& m = modes_.at(alpha);
  const double phase = m.k1 * x1 + m.k2 * x2;
  const double amp = normalization(m) * (m.sine ? std::sin(phase) : std::cos(phase));
  const auto p = m.polarization();
  return {amp * p[0], amp * p[1]};
}

void Galerkin::convective(ConstVecRef u, ConstVecRef v, VecRef out) const {
  if (static_cast<std::size_t>(u.size()) != dim() || static_cast<std::size_t>(v.size()) != dim() ||
      static_cast<std::size_t>(out.size()) != dim()) {
    throw DimensionError("convective term expects vectors of the Galerkin dimension");
  }
  out.setZero();
  for (const Entry& e : entries_) {
    out[static_cast<Eigen::Index>(e.gamma)] +=
        e.value * u[static_cast<Eigen::Index>(e.alpha)] * v[static_cast<Eigen::Index>(e.beta)];
  }
}

Vector Galerkin::convective(ConstVecRef u, ConstVecRef v) const {
  Vector out(static_cast<Eigen::Index>(dim()));
  convective(u, v, out);
  return out;
}

namespace {

std::vector<double> frobenius_squared(const Galerkin& g) {
  std::vector<double> f(g.dim(), 0.0);
  for (const auto& e : g.entries()) f[e.gamma] += e.value * e.value;
  return f;
}

}  // namespace

double Galerkin::frobenius_constant() const {
  const auto f = frobenius_squared(*this);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) sum += f[i] / modes_[i].k_squared();
  return sum;
}

double Galerkin::max_frobenius() const {
  const auto f = frobenius_squared(*this);
  return std::sqrt(*std::max_element(f.begin(), f.end()));
}

std::vector<double> noise_variances(const Config& cfg, const std::vector<Mode>& modes) {
  std::vector<double> q;
  q.reserve(modes.size());
  for (const auto& m : modes) {
    q.push_back(cfg.noise_amplitude / std::pow(std::sqrt(double(m.k_squared())), cfg.noise_decay));
  }
  return q;
}

CoefficientModel build_coefficients(const Config& cfg) {
  cfg.validate();
  auto galerkin = std::make_shared<const Galerkin>(cfg.k_max);
  const std::size_t n = galerkin->dim();
  Vector damping(static_cast<Eigen::Index>(n));
  Vector noise(static_cast<Eigen::Index>(n));
  const auto q = noise_variances(cfg, galerkin->modes());
  for (std::size_t i = 0; i < n; ++i) {
    damping[static_cast<Eigen::Index>(i)] =
        cfg.drift == DriftMode::kNone ? 0.0 : cfg.viscosity * galerkin->modes()[i].k_squared();
    noise[static_cast<Eigen::Index>(i)] = std::sqrt(2.0 * q[i]);
  }
  const bool nonlinear = cfg.drift == DriftMode::kFull;
  return CoefficientModel(
      "snse", n, n, cfg.horizon,
      [galerkin, damping, nonlinear](double, ConstVecRef y, VecRef out) {
        if (nonlinear) {
          galerkin->convective(y, y, out);
          out = -out - damping.cwiseProduct(y);
        } else {
          out = -damping.cwiseProduct(y);
        }
      },
      [noise](double, ConstVecRef, MatRef out) {
        out.setZero();
        out.diagonal() = noise;
      },
      true);
}

SpaceTriple triple(const Config& cfg) {
  std::vector<double> w;
  for (const auto& m : retained_modes(cfg.k_max)) w.push_back(m.k_squared());
  return SpaceTriple(std::move(w));
}

nlohmann::json Constants::to_json() const {
  return {{"gamma", params.gamma},     {"gamma_prime", params.gamma_prime},
          {"lambda1", params.lambda1}, {"lambda2", params.lambda2},
          {"lambda3", params.lambda3}, {"lambda4", params.lambda4},
          {"C0", lyapunov.C0},         {"M0", lyapunov.M0},
          {"envelope_C", params.envelopes.empty() ? 0.0 : params.envelopes.front().C}};
}

Constants constants(const Config& cfg) {
  cfg.validate();
  const Galerkin g(cfg.k_max);
  const auto q = noise_variances(cfg, g.modes());
  double q_sum = 0.0;
  double q_max = 0.0;
  for (double v : q) {
    q_sum += v;
    q_max = std::max(q_max, v);
  }
  const SpaceTriple tr = triple(cfg);
  const double nu = cfg.viscosity;

  Constants c;
  c.gauge = gauges::weighted_x_squared(tr, nu);
  c.params.gamma = 2.0;
  c.params.gamma_prime = 4.0;
  c.params.lambda1 = 0.0;
  c.params.lambda2 = 2.0 * nu;
  c.params.lambda3 = std::max(2.0 * g.frobenius_constant(), 1e-300);
  c.params.lambda4 = std::max(2.0 * q_sum, 1e-300);
  const double k_max_sq = double(cfg.k_max * cfg.k_max);
  c.params.envelopes = {GrowthEnvelope{q_max + nu * k_max_sq + g.max_frobenius(), 1.0}};
  c.lyapunov = quadratic_lyapunov(
      [tr, nu](ConstVecRef y) { return 2.0 * nu * tr.norm_squared(y, Norm::X); }, 2.0 * q_sum,
      4.0 * q_max, "2 nu |y|_X^2");
  return c;
}

nlohmann::json EnergyReport::to_json() const {
  return {{"times", times},
          {"lhs", lhs},
          {"rhs", rhs},
          {"standard_error", standard_error},
          {"slack", slack},
          {"equality", equality},
          {"verdict", to_string(verdict)}};
}

EnergyReport energy_check(const PathEnsemble& ens, const Config& cfg) {
  const SpaceTriple tr = triple(cfg);
  if (ens.dim != tr.n_max()) throw DimensionError("ensemble does not match the SNSE truncation");
  const CoefficientModel model = build_coefficients(cfg);
  const auto q = noise_variances(cfg, Galerkin(cfg.k_max).modes());
  double q2 = 0.0;
  for (double v : q) q2 += 2.0 * v;
  const double nu = cfg.drift == DriftMode::kNone ? 0.0 : cfg.viscosity;

  const std::size_t K = ens.nodes();
  const std::size_t M = ens.paths;
  const double x0_sq = ens.initial_point.squaredNorm();
  const double x0_x = tr.norm_squared(ens.initial_point, Norm::X);

  // Per path running values of |x|^2 + 2 nu int |x|_X^2 ds.
  std::vector<double> integral(M, 0.0);
  std::vector<double> prev_x(M, x0_x);
  Vector drift(static_cast<Eigen::Index>(ens.dim));
  double drift_integral = 0.0;
  double prev_drift_sq = 0.0;

  EnergyReport rep;
  rep.equality = cfg.drift == DriftMode::kNone;
  rep.times = ens.times;
  bool ok = true;
  for (std::size_t k = 0; k < K; ++k) {
    const double t = ens.times[k];
    const double h = k == 0 ? 0.0 : t - ens.times[k - 1];
    double sum = 0.0;
    double sum_sq = 0.0;
    double x_norm_mean = 0.0;
    double drift_sq = 0.0;
    for (std::size_t p = 0; p < M; ++p) {
      const auto x = ens.state(p, k);
      const double xx = tr.norm_squared(x, Norm::X);
      integral[p] += 0.5 * h * (xx + prev_x[p]);
      prev_x[p] = xx;
      const double v = x.squaredNorm() + 2.0 * nu * integral[p];
      sum += v;
      sum_sq += v * v;
      x_norm_mean += xx;
      model.drift(t, x, drift);
      drift_sq += drift.squaredNorm();
    }
    const double mean = sum / double(M);
    const double var = M > 1 ? std::max(0.0, (sum_sq - double(M) * mean * mean) / double(M - 1)) : 0.0;
    drift_sq /= double(M);
    x_norm_mean /= double(M);
    if (k > 0) drift_integral += 0.5 * h * (drift_sq + prev_drift_sq);
    prev_drift_sq = drift_sq;

    rep.lhs.push_back(mean);
    rep.rhs.push_back(x0_sq + t * q2);
    rep.standard_error.push_back(std::sqrt(var / double(M)));
    const double rec_dt = K > 1 ? ens.times[1] - ens.times[0] : 0.0;
    rep.slack.push_back(ens.dt * drift_integral + nu * rec_dt * (x_norm_mean + x0_x));
    const double allowance = 3.0 * rep.standard_error.back() + rep.slack.back() + 1e-12 * rep.rhs.back();
    const double gap = rep.lhs.back() - rep.rhs.back();
    if (gap > allowance || (rep.equality && -gap > allowance)) ok = false;
  }
  rep.verdict = ok ? Verdict::kPass : Verdict::kFail;
  return rep;
}

}  // namespace fpk::snse
