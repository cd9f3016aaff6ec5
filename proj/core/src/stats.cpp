#include "fpk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fpk/error.hpp"

namespace fpk::stats {

MeanError mean_error(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

double normal_cdf(double x, double mean, double variance) {
  if (variance <= 0.0) return x >= mean ? 1.0 : 0.0;
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw Error("KS statistic needs a non-empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_band_95(std::size_t n) { return 1.3581 / std::sqrt(static_cast<double>(n)); }

double trapezoid(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw DimensionError("trapezoid: size mismatch");
  double sum = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    sum += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
  }
  return sum;
}

}  // namespace fpk::stats
