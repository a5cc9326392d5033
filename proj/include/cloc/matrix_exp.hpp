#pragma once

#include <Eigen/Dense>

namespace cloc {

// e^A by scaling and squaring around a diagonal [6/6] Pade approximant.
// Intended for the small dense matrices of reset elements.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A);

}  // namespace cloc
