#pragma once

#include <Eigen/Dense>

namespace qad::linalg {

struct SymmetricEigenResult {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns; empty when not requested
};

// Lowest `count` eigenpairs of a real symmetric matrix (LAPACK dsyevr).
// count <= 0 requests the full spectrum. Only the lower triangle is read.
SymmetricEigenResult symmetric_eigen(Eigen::MatrixXd matrix, int count = 0,
                                     bool want_vectors = true);

}  // namespace qad::linalg
