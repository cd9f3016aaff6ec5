#pragma once

#include <Eigen/Dense>

namespace fpk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VecRef = Eigen::Ref<Eigen::VectorXd>;
using ConstVecRef = Eigen::Ref<const Eigen::VectorXd>;
using MatRef = Eigen::Ref<Eigen::MatrixXd>;
using ConstMatRef = Eigen::Ref<const Eigen::MatrixXd>;

}  // namespace fpk
