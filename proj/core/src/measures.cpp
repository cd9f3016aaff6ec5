#include "fpk/measures.hpp"

#include <algorithm>
#include <cmath>

#include "fpk/error.hpp"

namespace fpk {

namespace {

template <class PointFn>
double fold_points(const Measure& mu, PointFn&& fn) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        double sum = 0.0;
        if constexpr (std::is_same_v<T, EmpiricalMeasure>) {
          const std::size_t count = m.size();
          if (m.equally_weighted()) {
            for (std::size_t i = 0; i < count; ++i) {
              sum += fn(m.points.col(static_cast<Eigen::Index>(i)).data());
            }
            return sum / static_cast<double>(count);
          }
          for (std::size_t i = 0; i < count; ++i) {
            sum += m.weights[static_cast<Eigen::Index>(i)] *
                   fn(m.points.col(static_cast<Eigen::Index>(i)).data());
          }
          return sum;
        } else {
          double center[2] = {0.0, 0.0};
          const std::size_t count = m.cell_count();
          for (std::size_t i = 0; i < count; ++i) {
            const double v = m.values[static_cast<Eigen::Index>(i)];
            if (v == 0.0) continue;
            m.cell_center(i, center);
            sum += v * fn(center);
          }
          return sum * m.cell_volume();
        }
      },
      mu);
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(Matrix pts, Vector w) : points(std::move(pts)), weights(std::move(w)) {
  if (points.cols() == 0) throw Error("empirical measure needs at least one atom");
  if (!points.allFinite()) throw Error("empirical measure has non-finite atoms");
  if (weights.size() != 0) {
    if (weights.size() != points.cols()) throw DimensionError("weights/points count mismatch");
    if ((weights.array() < 0.0).any()) throw Error("negative weight");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw Error("weights must sum to 1");
  }
}

EmpiricalMeasure EmpiricalMeasure::dirac(ConstVecRef x) {
  Matrix p(x.size(), 1);
  p.col(0) = x;
  return EmpiricalMeasure(std::move(p));
}

GridDensity::GridDensity(std::vector<GridAxis> ax, Vector vals) : axes(std::move(ax)), values(std::move(vals)) {
  if (axes.empty() || axes.size() > 2) throw DimensionError("grid densities support 1 or 2 axes");
  for (const auto& a : axes) {
    if (a.cells == 0 || !(a.hi > a.lo)) throw Error("invalid grid axis");
  }
  if (static_cast<std::size_t>(values.size()) != cell_count()) {
    throw DimensionError("grid density value count does not match the grid");
  }
  if ((values.array() < 0.0).any()) throw Error("grid density must be nonnegative");
}

std::size_t GridDensity::cell_count() const noexcept {
  std::size_t c = 1;
  for (const auto& a : axes) c *= a.cells;
  return c;
}

double GridDensity::cell_volume() const noexcept {
  double v = 1.0;
  for (const auto& a : axes) v *= a.width();
  return v;
}

void GridDensity::cell_center(std::size_t flat, double* out) const noexcept {
  if (axes.size() == 1) {
    out[0] = axes[0].center(flat);
    return;
  }
  out[0] = axes[0].center(flat / axes[1].cells);
  out[1] = axes[1].center(flat % axes[1].cells);
}

std::size_t measure_dim(const Measure& mu) {
  return std::visit([](const auto& m) { return m.dim(); }, mu);
}

std::string measure_kind(const Measure& mu) {
  return std::holds_alternative<EmpiricalMeasure>(mu) ? "empirical" : "grid";
}

double integrate(const Measure& mu, const FinitelyBasedFunction& f) {
  if (f.base_dim() > measure_dim(mu)) {
    throw DimensionError(f.name() + " needs " + std::to_string(f.base_dim()) +
                         " coordinates; measure lives on H_" + std::to_string(measure_dim(mu)));
  }
  return fold_points(mu, [&f](const double* p) { return f.value_raw(p); });
}

double integrate(const Measure& mu, const std::function<double(ConstVecRef)>& phi) {
  const auto n = static_cast<Eigen::Index>(measure_dim(mu));
  return fold_points(mu, [&](const double* p) { return phi(Eigen::Map<const Vector>(p, n)); });
}

Vector family_integrals(const Measure& mu, const TestFamily& family) {
  Vector out(static_cast<Eigen::Index>(family.size()));
  for (std::size_t i = 0; i < family.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = integrate(mu, family[i]);
  }
  return out;
}

double finite_mass_fraction(const Measure& mu, const std::function<double(ConstVecRef)>& phi) {
  const auto n = static_cast<Eigen::Index>(measure_dim(mu));
  return fold_points(mu, [&](const double* p) {
    return std::isfinite(phi(Eigen::Map<const Vector>(p, n))) ? 1.0 : 0.0;
  });
}

Vector measure_mean(const Measure& mu) {
  const auto n = static_cast<Eigen::Index>(measure_dim(mu));
  Vector mean(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    mean[i] = fold_points(mu, [i](const double* p) { return p[i]; });
  }
  return mean;
}

Vector measure_variance(const Measure& mu) {
  const Vector mean = measure_mean(mu);
  Vector var(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double m = mean[i];
    var[i] = fold_points(mu, [i, m](const double* p) { return (p[i] - m) * (p[i] - m); });
  }
  return var;
}

void MarginalFlow::validate() const {
  if (times.empty() || times.size() != nodes.size()) throw Error("flow needs one measure per time");
  if (std::abs(times.front()) > 1e-15) throw Error("flow time grid must start at 0");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw Error("flow time grid must be strictly increasing");
  }
  for (const auto& node : nodes) {
    if (measure_dim(node) != dim) throw DimensionError("flow nodes must share the dimension n");
  }
  if (static_cast<std::size_t>(initial_point.size()) != dim) {
    throw DimensionError("flow initial point has the wrong dimension");
  }
}

std::size_t MarginalFlow::node_at(double t) const {
  const double scale = std::max(1.0, std::abs(times.back()));
  const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9 * scale);
  if (it == times.end() || std::abs(*it - t) > 1e-9 * scale) {
    throw GridMismatchError("time " + std::to_string(t) + " is not a node of the flow");
  }
  return static_cast<std::size_t>(it - times.begin());
}

std::size_t MarginalFlow::nearest_node(double t) const {
  const double scale = std::max(1.0, std::abs(times.back()));
  if (t < times.front() - 1e-9 * scale || t > times.back() + 1e-9 * scale) {
    throw Error("time " + std::to_string(t) + " outside the flow range");
  }
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end()) return times.size() - 1;
  const auto k = static_cast<std::size_t>(it - times.begin());
  if (k == 0) return 0;
  return (t - times[k - 1] <= times[k] - t) ? k - 1 : k;
}

std::string MarginalFlow::kind() const {
  return nodes.empty() ? "empty" : measure_kind(nodes.front());
}

bool same_time_grid(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::abs(a[i]))) return false;
  }
  return true;
}

}  // namespace fpk
