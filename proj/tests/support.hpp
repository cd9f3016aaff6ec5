#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include "fpk/measures.hpp"

namespace fpk::testing {

/// Composite Simpson rule with `intervals` (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int intervals = 20000) {
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

inline double normal_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Law of dX = -theta X dt + sigma dW at time t from x0.
struct OuLaw {
  double mean;
  double var;
};

inline OuLaw ou_law(double x0, double t, double theta = 1.0, double sigma = std::numbers::sqrt2) {
  return {x0 * std::exp(-theta * t),
          sigma * sigma / (2.0 * theta) * (1.0 - std::exp(-2.0 * theta * t))};
}

/// 1-D grid density whose cells hold the exact cell averages of a pdf.
inline GridDensity cell_averaged(const std::function<double(double)>& pdf, double lo, double hi,
                                 std::size_t cells) {
  GridAxis axis{lo, hi, cells};
  Vector values(static_cast<Eigen::Index>(cells));
  for (std::size_t i = 0; i < cells; ++i) {
    const double a = axis.face(i);
    values[static_cast<Eigen::Index>(i)] = simpson(pdf, a, a + axis.width(), 8) / axis.width();
  }
  return GridDensity({axis}, std::move(values));
}

}  // namespace fpk::testing
