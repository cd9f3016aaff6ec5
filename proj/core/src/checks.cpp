#include "fpk/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "fpk/error.hpp"
#include "fpk/parallel.hpp"

namespace fpk::checks {

namespace {

struct Sample {
  double t = 0.0;
  Vector y;
  double margin = std::numeric_limits<double>::infinity();
  bool violated = false;  // set by checkers with a criterion other than margin < -tol
};

// Evaluates every planned sample and folds them in index order.
template <class MarginFn>
CheckReport run(std::string name, const SamplePlan& plan, double tol, MarginFn&& margin_of) {
  std::vector<Sample> samples(plan.samples);
  parallel_for(plan.samples, [&](std::size_t i) { samples[i] = margin_of(i); });

  CheckReport report;
  report.name = std::move(name);
  report.samples_used = plan.samples;
  if (plan.samples == 0) return report;

  std::size_t worst = 0;
  bool nan_seen = false;
  bool violated = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (std::isnan(samples[i].margin)) {
      nan_seen = true;
      continue;
    }
    violated = violated || samples[i].violated || samples[i].margin < -tol;
    if (std::isnan(samples[worst].margin) || samples[i].margin < samples[worst].margin) worst = i;
  }
  report.worst_case = {samples[worst].t, samples[worst].y, samples[worst].margin};
  if (violated) {
    report.verdict = Verdict::kFail;
  } else {
    report.verdict = nan_seen ? Verdict::kIndeterminate : Verdict::kPass;
  }
  return report;
}

}  // namespace

CheckReport symmetry_psd(const DiffusionFn& a_fn, std::size_t n, double horizon,
                         const SamplePlan& plan, double eig_tol, double sym_tol) {
  // Margin is the smallest eigenvalue of the symmetric part, or -asymmetry
  // when A is not symmetric to sym_tol.
  return run("symmetry_psd", plan, eig_tol, [&](std::size_t i) {
    Sample s{plan.time(i, horizon), plan.state(i, n)};
    const Matrix a = a_fn(s.t, s.y);
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > sym_tol) {
      s.margin = -asym;
      s.violated = true;
      return s;
    }
    const Matrix sym = 0.5 * (a + a.transpose());
    s.margin = Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly)
                   .eigenvalues()
                   .minCoeff();
    return s;
  });
}

CheckReport symmetry_psd(const CoefficientModel& model, const SamplePlan& plan, double eig_tol,
                         double sym_tol) {
  return symmetry_psd(
      [&model](double t, ConstVecRef y) { return diffusion_matrix(model, t, y); }, model.dim(),
      model.horizon(), plan, eig_tol, sym_tol);
}

CheckReport coercivity(const CoefficientModel& model, const NFunction& gauge,
                       const AssumptionParams& params, const SamplePlan& plan, double tol) {
  return run("coercivity", plan, tol, [&](std::size_t i) {
    Sample s{plan.time(i, model.horizon()), plan.state(i, model.dim())};
    const double lhs = pairing(model.drift(s.t, s.y), s.y);
    const double rhs = -gauge(s.y) + params.lambda1 * (1.0 + s.y.squaredNorm());
    s.margin = rhs - lhs;
    return s;
  });
}

CheckReport growth(const CoefficientModel& model, const SpaceTriple& triple,
                   const NFunction& gauge, const AssumptionParams& params,
                   const SamplePlan& plan, double tol) {
  params.validate();
  return run("growth", plan, tol, [&](std::size_t i) {
    Sample s{plan.time(i, model.horizon()), plan.state(i, model.dim())};
    const double h = s.y.norm();
    const double b_dual = triple.norm(model.drift(s.t, s.y), Norm::XStar);
    const double lhs1 = std::pow(b_dual, params.gamma);
    const double rhs1 = params.lambda2 * gauge(s.y) +
                        params.lambda3 * (1.0 + std::pow(h, params.gamma_prime));
    const double hs = model.sigma(s.t, s.y).squaredNorm();
    const double rhs2 = params.lambda4 * (1.0 + h * h);
    s.margin = std::min((rhs1 - lhs1) / rhs1, (rhs2 - hs) / rhs2);
    return s;
  });
}

CheckReport lyapunov(const CoefficientModel& model, const LyapunovData& lyap,
                     const SamplePlan& plan, double tol) {
  return run("lyapunov", plan, tol, [&](std::size_t i) {
    Sample s{plan.time(i, model.horizon()), plan.state(i, model.dim())};
    const double v = lyap.value(s.y);
    const Vector g = lyap.gradient(s.y);
    const Matrix a = diffusion_matrix(model, s.t, s.y);
    const double lv = generator(model, s.t, s.y, g, lyap.hessian(s.y));
    const double margin1 = lyap.C0 * v - lyap.theta(s.y) - lv;
    const double margin2 = lyap.M0 * v * v - g.dot(a * g);
    s.margin = std::min(margin1, margin2);
    return s;
  });
}

CheckReport coefficient_envelope(const CoefficientModel& model, const LyapunovData& lyap,
                                 const AssumptionParams& params, const SamplePlan& plan,
                                 double tol) {
  if (params.envelopes.empty()) throw Error("envelope check needs at least one growth envelope");
  return run("coefficient_envelope", plan, tol, [&](std::size_t i) {
    Sample s{plan.time(i, model.horizon()), plan.state(i, model.dim())};
    const Matrix a = diffusion_matrix(model, s.t, s.y);
    const Vector b = model.drift(s.t, s.y);
    const double v = lyap.value(s.y);
    const double th = lyap.theta(s.y);
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      const auto& env =
          params.envelopes[std::min<std::size_t>(static_cast<std::size_t>(r),
                                                 params.envelopes.size() - 1)];
      const double rhs = env.C * std::pow(v, env.k) * (1.0 + env.kappa(th) * th);
      for (Eigen::Index c = 0; c <= r; ++c) {
        margin = std::min(margin, rhs - (std::abs(a(r, c)) + std::abs(b[r])));
      }
    }
    s.margin = margin;
    return s;
  });
}

nlohmann::json NClassResult::to_json() const {
  return {{"report", report.to_json()}, {"truncations", truncations}, {"constants", constants}};
}

NClassResult n_class(const NFunction& gauge, const SamplePlan& plan, double tol) {
  if (plan.truncations.empty()) throw Error("N-class check needs at least one truncation");
  NClassResult result;
  result.truncations = plan.truncations;
  CheckReport& report = result.report;
  report.name = "N class";
  report.worst_case.margin = std::numeric_limits<double>::infinity();
  bool violated = false;

  auto consider = [&](double t, const Vector& y, double margin, bool bad) {
    violated = violated || bad || margin < -tol || std::isnan(margin);
    if (std::isnan(margin) || margin < report.worst_case.margin) {
      report.worst_case = {t, y, std::isnan(margin) ? -std::numeric_limits<double>::infinity()
                                                    : margin};
    }
  };

  for (std::size_t n : plan.truncations) {
    const Vector origin = Vector::Zero(static_cast<Eigen::Index>(n));
    const double at_zero = gauge(origin);
    consider(0.0, origin, -std::abs(at_zero), at_zero != 0.0);

    double c_n = 0.0;
    for (std::size_t i = 0; i < plan.samples; ++i) {
      const Vector v = plan.state(i, n);
      const double h = v.norm();
      if (h == 0.0) continue;
      const double nv = gauge(v);
      c_n = std::max(c_n, nv / std::pow(h, gauge.p));
      // N(v) > 0 off the origin: margin is N(v) itself, flagged when not positive.
      consider(0.0, v, nv, !(nv > 0.0));
      // N(c v) <= c^rho N(v) for c in [0, 3); t records c.
      const double c = 3.0 * plan.uniform(i, 1);
      const double rhs = std::pow(c, gauge.rho) * nv;
      consider(c, v, (rhs - gauge(c * v)) / std::max(1.0, std::abs(rhs)), false);
      ++report.samples_used;
    }
    if (!std::isfinite(c_n)) violated = true;
    result.constants.push_back(c_n);
  }

  if (report.samples_used == 0) {
    report.verdict = Verdict::kIndeterminate;
  } else {
    report.verdict = violated ? Verdict::kFail : Verdict::kPass;
  }
  return result;
}

bool DemicontinuityTrace::decreasing(double final_tol) const {
  auto tail_ok = [final_tol](const std::vector<double>& g) {
    if (g.empty()) return false;
    for (std::size_t k = g.size() / 2 + 1; k < g.size(); ++k) {
      if (g[k] > g[k - 1] * (1.0 + 1e-9) + 1e-15) return false;
    }
    return g.back() <= final_tol;
  };
  return tail_ok(drift_gaps) && tail_ok(noise_gaps);
}

DemicontinuityTrace demicontinuity(const CoefficientModel& model, double t, ConstVecRef y,
                                   ConstVecRef w, ConstVecRef v, std::size_t terms) {
  DemicontinuityTrace trace;
  const Vector b0 = model.drift(t, y);
  const Vector s0 = model.sigma(t, y).transpose() * v;
  for (std::size_t k = 0; k < terms; ++k) {
    const Vector yk = y + std::ldexp(1.0, -static_cast<int>(k)) * w;
    trace.drift_gaps.push_back(std::abs(pairing(model.drift(t, yk) - b0, v)));
    trace.noise_gaps.push_back((model.sigma(t, yk).transpose() * v - s0).norm());
  }
  return trace;
}

double time_modulus(const CoefficientModel& model, const SamplePlan& plan, std::size_t steps) {
  if (steps == 0) throw Error("time modulus needs at least one interval");
  double modulus = 0.0;
  const double h = model.horizon() / static_cast<double>(steps);
  for (std::size_t i = 0; i < plan.samples; ++i) {
    const Vector y = plan.state(i, model.dim());
    Matrix a_prev = diffusion_matrix(model, 0.0, y);
    Vector b_prev = model.drift(0.0, y);
    for (std::size_t k = 1; k <= steps; ++k) {
      const double t = std::min(model.horizon(), static_cast<double>(k) * h);
      Matrix a = diffusion_matrix(model, t, y);
      Vector b = model.drift(t, y);
      modulus = std::max({modulus, (a - a_prev).cwiseAbs().maxCoeff(),
                          (b - b_prev).cwiseAbs().maxCoeff()});
      a_prev = std::move(a);
      b_prev = std::move(b);
    }
  }
  return modulus;
}

}  // namespace fpk::checks
