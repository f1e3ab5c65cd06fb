#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace zibbmr {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector2 = Eigen::Vector2d;
using Matrix2 = Eigen::Matrix2d;

}  // namespace zibbmr
