#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "fpk/linalg.hpp"
#include "fpk/test_functions.hpp"

namespace fpk {

/// Weighted atoms in H_n. Points are the columns of an n x count matrix;
/// an empty weight vector means equal weights 1/count.
struct EmpiricalMeasure {
  Matrix points;
  Vector weights;

  EmpiricalMeasure() = default;
  /// Validates finiteness and sum of weights = 1 +- 1e-12.
  EmpiricalMeasure(Matrix points, Vector weights = {});

  static EmpiricalMeasure dirac(ConstVecRef x);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(points.rows()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(points.cols()); }
  bool equally_weighted() const noexcept { return weights.size() == 0; }
  double weight(std::size_t i) const noexcept {
    return equally_weighted() ? 1.0 / static_cast<double>(size())
                              : weights[static_cast<Eigen::Index>(i)];
  }
};

/// Uniform cell-centred axis with `cells` cells on [lo, hi].
struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t cells = 1;

  double width() const noexcept { return (hi - lo) / static_cast<double>(cells); }
  double center(std::size_t i) const noexcept {
    return lo + (static_cast<double>(i) + 0.5) * width();
  }
  double face(std::size_t i) const noexcept { return lo + static_cast<double>(i) * width(); }
};

/// Cell-averaged density on a tensor grid of dimension 1 or 2. Values are
/// stored with the last axis fastest.
struct GridDensity {
  std::vector<GridAxis> axes;
  Vector values;

  GridDensity() = default;
  GridDensity(std::vector<GridAxis> axes, Vector values);

  std::size_t dim() const noexcept { return axes.size(); }
  std::size_t cell_count() const noexcept;
  double cell_volume() const noexcept;
  /// Center of the flat-indexed cell.
  void cell_center(std::size_t flat, double* out) const noexcept;
  double mass() const { return values.sum() * cell_volume(); }
};

using Measure = std::variant<EmpiricalMeasure, GridDensity>;

std::size_t measure_dim(const Measure& mu);
std::string measure_kind(const Measure& mu);

double integrate(const Measure& mu, const FinitelyBasedFunction& f);
double integrate(const Measure& mu, const std::function<double(ConstVecRef)>& phi);
/// Vector of integrals, one per family member.
Vector family_integrals(const Measure& mu, const TestFamily& family);
/// Total mass on which phi is finite.
double finite_mass_fraction(const Measure& mu, const std::function<double(ConstVecRef)>& phi);

/// Per-coordinate mean and variance.
Vector measure_mean(const Measure& mu);
Vector measure_variance(const Measure& mu);

/// A candidate probability solution: one measure per node of a strictly
/// increasing time grid starting at 0, all on the same H_n.
struct MarginalFlow {
  std::size_t dim = 0;
  Vector initial_point;  // Pi_n x0
  std::vector<double> times;
  std::vector<Measure> nodes;
  /// Dirac mollification width of the first node (0 for exact atoms).
  double initial_bandwidth = 0.0;

  /// Throws unless the invariants hold.
  void validate() const;
  std::size_t size() const noexcept { return times.size(); }
  /// Index of the node at t (relative tolerance 1e-9); throws GridMismatchError.
  std::size_t node_at(double t) const;
  /// Nearest node to t; throws Error outside [t_0, t_K].
  std::size_t nearest_node(double t) const;
  std::string kind() const;
};

/// True when two time grids coincide to relative tolerance 1e-9.
bool same_time_grid(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace fpk
