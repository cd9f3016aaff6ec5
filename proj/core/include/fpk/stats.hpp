#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fpk::stats {

struct MeanError {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Sample mean and its standard error (unbiased variance / count).
MeanError mean_error(std::span<const double> values);

double normal_cdf(double x, double mean = 0.0, double variance = 1.0);

/// sup_x |F_n(x) - F(x)| for the empirical CDF of `sample`.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Asymptotic 95% Kolmogorov-Smirnov band half-width, 1.3581 / sqrt(n).
double ks_band_95(std::size_t n);

/// Trapezoid rule for values on a (possibly non-uniform) grid.
double trapezoid(std::span<const double> times, std::span<const double> values);

}  // namespace fpk::stats
