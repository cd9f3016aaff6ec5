#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/linalg.hpp"

namespace fpk {

/// Which member of the triple X = l2(lambda) c H = l2 c X* = l2(1/lambda).
enum class Norm { X, H, XStar };

/// Weighted l2 triple truncated at n_max coordinates.
///
/// weights[i] is lambda_{i+1}. Zero weights are allowed; they only become an
/// error when the dual norm meets a nonzero coordinate there.
class SpaceTriple {
 public:
  /// `monotone_from` is the first index from which the weights must be
  /// non-decreasing (the finite stand-in for lambda_i -> infinity).
  SpaceTriple(std::vector<double> weights, std::size_t monotone_from = 0);

  static SpaceTriple unit(std::size_t n_max);

  std::size_t n_max() const noexcept { return weights_.size(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double weight(std::size_t i) const { return weights_.at(i); }
  std::size_t monotone_from() const noexcept { return monotone_from_; }

  double norm(ConstVecRef z, Norm which) const;
  double norm_squared(ConstVecRef z, Norm which) const;

  /// Pi_n z: the first n coordinates.
  Vector project(ConstVecRef z, std::size_t n) const;

  nlohmann::json to_json() const;
  static SpaceTriple from_json(const nlohmann::json& j);

 private:
  std::vector<double> weights_;
  std::size_t monotone_from_;
};

/// Euclidean dot product, i.e. the X*-X pairing restricted to H_n.
inline double pairing(ConstVecRef z, ConstVecRef v) { return z.dot(v); }

}  // namespace fpk
