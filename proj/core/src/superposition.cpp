#include "fpk/superposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fpk/error.hpp"
#include "fpk/parallel.hpp"
#include "fpk/stats.hpp"

namespace fpk {

double marginal_distance(const Measure& mu, const Measure& nu, const TestFamily& family) {
  if (family.empty()) return 0.0;
  return (family_integrals(mu, family) - family_integrals(nu, family)).cwiseAbs().maxCoeff();
}

std::vector<double> flow_distances(const MarginalFlow& a, const MarginalFlow& b,
                                   const TestFamily& family) {
  if (!same_time_grid(a.times, b.times)) {
    throw GridMismatchError("flows are recorded on different time grids");
  }
  std::vector<double> out(a.size());
  parallel_for(a.size(), [&](std::size_t k) {
    out[k] = marginal_distance(a.nodes[k], b.nodes[k], family);
  });
  return out;
}

double lyapunov_M(double C0, double M0, int k) {
  return static_cast<double>(k) * (C0 + static_cast<double>(k - 1) * M0);
}

double lyapunov_N(double C0, double M0, int k) {
  const double m = lyapunov_M(C0, M0, k);
  return m * std::exp(m) + 1.0;
}

double LyapunovLedger::max_lhs() const {
  return lhs.empty() ? 0.0 : *std::max_element(lhs.begin(), lhs.end());
}

nlohmann::json LyapunovLedger::to_json() const {
  return {{"k", k},         {"M_k", M_k},   {"N_k", N_k},
          {"W_k", W_k},     {"rhs", rhs},   {"max_lhs", max_lhs()},
          {"times", times}, {"lhs", lhs},   {"finite_mass", finite_mass},
          {"verdict", to_string(verdict)}};
}

LyapunovLedger lyapunov_bound_check(const MarginalFlow& flow, const LyapunovData& lyap, int k,
                                    ConstVecRef x0, std::size_t n_max) {
  if (k < 1) throw Error("Lyapunov exponent k must be >= 1");
  LyapunovLedger led;
  led.k = k;
  led.M_k = lyapunov_M(lyap.C0, lyap.M0, k);
  led.N_k = lyapunov_N(lyap.C0, lyap.M0, k);
  led.W_k = lyapunov_w(lyap, x0, k, n_max);
  led.rhs = led.N_k * led.W_k;
  led.times = flow.times;

  const double kd = static_cast<double>(k);
  auto vk = [&](ConstVecRef y) { return std::pow(lyap.value(y), kd); };
  auto dissipation = [&](ConstVecRef y) {
    return std::pow(lyap.value(y), kd - 1.0) * lyap.theta(y);
  };

  std::vector<double> moment(flow.size());
  std::vector<double> theta_int(flow.size());
  std::vector<double> finite(flow.size());
  parallel_for(flow.size(), [&](std::size_t i) {
    moment[i] = integrate(flow.nodes[i], vk);
    theta_int[i] = integrate(flow.nodes[i], dissipation);
    finite[i] = finite_mass_fraction(flow.nodes[i], [&](ConstVecRef y) { return lyap.value(y); });
  });

  double running = 0.0;
  bool ok = true;
  led.lhs.resize(flow.size());
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (i > 0) {
      running += 0.5 * (flow.times[i] - flow.times[i - 1]) * (theta_int[i] + theta_int[i - 1]);
    }
    led.lhs[i] = moment[i] + kd * running;
    if (!(led.lhs[i] <= led.rhs * (1.0 + 1e-6))) ok = false;
  }
  led.finite_mass = *std::min_element(finite.begin(), finite.end());
  if (led.finite_mass < 1.0 - 1e-12) ok = false;
  led.verdict = ok ? Verdict::kPass : Verdict::kFail;
  return led;
}

double operator_norm(ConstMatRef a, double tol, std::size_t max_iters) {
  const Matrix ata = a.transpose() * a;
  if (ata.size() == 0 || ata.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Vector v = Vector::Ones(ata.cols()).normalized();
  double prev = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Vector w = ata * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double rayleigh = v.dot(w);
    v = w / norm;
    if (std::abs(rayleigh - prev) <= tol * std::max(1.0, rayleigh)) {
      return std::sqrt(std::max(rayleigh, 0.0));
    }
    prev = rayleigh;
  }
  return std::sqrt(std::max(v.dot(ata * v), 0.0));
}

double s2_integrability(const MarginalFlow& flow, const CoefficientModel& model, bool frobenius) {
  if (model.dim() != flow.dim) throw DimensionError("model and flow dimensions differ");
  const auto n = static_cast<Eigen::Index>(flow.dim);
  std::vector<double> per_node(flow.size());
  parallel_for(flow.size(), [&](std::size_t k) {
    Vector drift(n);
    Matrix sigma(n, static_cast<Eigen::Index>(model.noise_dim()));
    Matrix a(n, n);
    const double t = flow.times[k];
    per_node[k] = integrate(flow.nodes[k], [&](ConstVecRef y) {
      model.drift(t, y, drift);
      diffusion_matrix(model, t, y, sigma, a);
      const double anorm = frobenius ? a.norm() : operator_norm(a);
      const double denom = 1.0 + y.norm();
      return (anorm + std::abs(drift.dot(y))) / (denom * denom);
    });
  });
  const double value = stats::trapezoid(flow.times, per_node);
  return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
}

nlohmann::json ConvergenceTable::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"t", r.t}, {"n", r.n}, {"n_other", r.n_other}, {"distance", r.distance}});
  }
  return {{"levels", levels},
          {"times", times},
          {"rows", rows_json},
          {"sup_to_finest", sup_to_finest},
          {"decreasing", decreasing}};
}

std::string ConvergenceTable::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t,n,n_other,distance\n";
  for (const auto& r : rows) os << r.t << ',' << r.n << ',' << r.n_other << ',' << r.distance << '\n';
  return os.str();
}

ConvergenceTable galerkin_convergence(const std::map<std::size_t, MarginalFlow>& flows,
                                      const TestFamily& family, const std::vector<double>& times) {
  if (flows.size() < 2) throw Error("convergence table needs at least two truncation levels");
  ConvergenceTable table;
  for (const auto& [n, flow] : flows) {
    if (flow.dim != n) throw DimensionError("flow dimension differs from its level key");
    table.levels.push_back(n);
  }
  for (const auto& f : family) {
    if (f.base_dim() > table.levels.front()) {
      throw DimensionError(f.name() + " reads more coordinates than the smallest level");
    }
  }
  table.times = times;

  // Family integrals per (level, time).
  const std::size_t L = table.levels.size();
  std::vector<Vector> integrals(L * times.size());
  parallel_for(integrals.size(), [&](std::size_t cell) {
    const std::size_t li = cell / times.size();
    const std::size_t ti = cell % times.size();
    const MarginalFlow& flow = flows.at(table.levels[li]);
    integrals[cell] = family_integrals(flow.nodes[flow.node_at(times[ti])], family);
  });
  auto at = [&](std::size_t li, std::size_t ti) -> const Vector& {
    return integrals[li * times.size() + ti];
  };

  table.sup_to_finest.assign(L - 1, 0.0);
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = i + 1; j < L; ++j) {
        const double d = family.empty() ? 0.0 : (at(i, ti) - at(j, ti)).cwiseAbs().maxCoeff();
        table.rows.push_back({times[ti], table.levels[i], table.levels[j], d});
        if (j == L - 1) table.sup_to_finest[i] = std::max(table.sup_to_finest[i], d);
      }
    }
  }
  table.decreasing = true;
  for (std::size_t i = 1; i < table.sup_to_finest.size(); ++i) {
    if (!(table.sup_to_finest[i] < table.sup_to_finest[i - 1])) table.decreasing = false;
  }
  return table;
}

double SuperpositionReport::sup_distance() const {
  return distances.empty() ? 0.0 : *std::max_element(distances.begin(), distances.end());
}

nlohmann::json SuperpositionReport::to_json() const {
  nlohmann::json j = {{"times", times},
                      {"distances", distances},
                      {"sup_distance", sup_distance()},
                      {"tolerance", tolerance},
                      {"family_size", family_size},
                      {"verdict", to_string(verdict)}};
  nlohmann::json ledger = nlohmann::json::array();
  for (const auto& l : lyapunov) ledger.push_back(l.to_json());
  j["lyapunov"] = ledger;
  j["s2"] = s2 ? nlohmann::json(*s2) : nlohmann::json(nullptr);
  j["convergence"] = convergence ? convergence->to_json() : nlohmann::json(nullptr);
  return j;
}

SuperpositionReport verify_superposition(const MarginalFlow& flow, const PathEnsemble& ens,
                                         const TestFamily& family, double tol) {
  if (flow.dim != ens.dim) throw DimensionError("flow and ensemble dimensions differ");
  SuperpositionReport rep;
  rep.times = flow.times;
  rep.distances = flow_distances(flow, marginal_flow(ens), family);
  rep.tolerance = tol;
  rep.family_size = family.size();
  rep.verdict = rep.sup_distance() <= tol ? Verdict::kPass : Verdict::kFail;
  return rep;
}

}  // namespace fpk
