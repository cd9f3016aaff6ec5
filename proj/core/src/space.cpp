#include "fpk/space.hpp"

#include <cmath>
#include <string>

#include "fpk/error.hpp"

namespace fpk {

SpaceTriple::SpaceTriple(std::vector<double> weights, std::size_t monotone_from)
    : weights_(std::move(weights)), monotone_from_(monotone_from) {
  if (weights_.empty()) throw DimensionError("space triple needs n_max >= 1");
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_[i]) || weights_[i] < 0.0) {
      throw Error("weight lambda_" + std::to_string(i + 1) + " must be finite and >= 0");
    }
    if (i > monotone_from_ && i > 0 && weights_[i] < weights_[i - 1]) {
      throw Error("weights must be non-decreasing from index " +
                  std::to_string(monotone_from_ + 1));
    }
  }
}

SpaceTriple SpaceTriple::unit(std::size_t n_max) {
  return SpaceTriple(std::vector<double>(n_max, 1.0));
}

double SpaceTriple::norm_squared(ConstVecRef z, Norm which) const {
  const auto len = static_cast<std::size_t>(z.size());
  if (len > n_max()) {
    throw DimensionError("vector of length " + std::to_string(len) + " exceeds n_max " +
                         std::to_string(n_max()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double zi = z[static_cast<Eigen::Index>(i)];
    switch (which) {
      case Norm::H:
        sum += zi * zi;
        break;
      case Norm::X:
        sum += weights_[i] * zi * zi;
        break;
      case Norm::XStar:
        if (zi == 0.0) break;
        if (weights_[i] == 0.0) {
          throw SingularWeightError("X*-norm undefined: lambda_" + std::to_string(i + 1) +
                                    " = 0 with nonzero coordinate");
        }
        sum += zi * zi / weights_[i];
        break;
    }
  }
  return sum;
}

double SpaceTriple::norm(ConstVecRef z, Norm which) const {
  return std::sqrt(norm_squared(z, which));
}

Vector SpaceTriple::project(ConstVecRef z, std::size_t n) const {
  if (n == 0 || n > n_max()) {
    throw DimensionError("truncation " + std::to_string(n) + " outside [1, " +
                         std::to_string(n_max()) + "]");
  }
  if (static_cast<std::size_t>(z.size()) < n) {
    throw DimensionError("cannot project a vector of length " + std::to_string(z.size()) +
                         " onto H_" + std::to_string(n));
  }
  return z.head(static_cast<Eigen::Index>(n));
}

nlohmann::json SpaceTriple::to_json() const {
  return {{"lambda", weights_}, {"n_max", n_max()}, {"monotone_from", monotone_from_}};
}

SpaceTriple SpaceTriple::from_json(const nlohmann::json& j) {
  auto weights = j.at("lambda").get<std::vector<double>>();
  const auto n_max = j.value("n_max", weights.size());
  if (n_max == 0) throw DimensionError("n_max must be >= 1");
  if (weights.size() < n_max) {
    throw DimensionError("lambda has " + std::to_string(weights.size()) +
                         " entries but n_max = " + std::to_string(n_max));
  }
  weights.resize(n_max);
  return SpaceTriple(std::move(weights), j.value("monotone_from", std::size_t{0}));
}

}  // namespace fpk
