#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>

namespace rgan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace rgan
