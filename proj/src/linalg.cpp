#include "qad/linalg.hpp"

#include <lapacke.h>

#include <string>
#include <vector>

#include "qad/errors.hpp"

namespace qad::linalg {

SymmetricEigenResult symmetric_eigen(Eigen::MatrixXd matrix, int count,
                                     bool want_vectors) {
  const auto n = static_cast<lapack_int>(matrix.rows());
  require(matrix.cols() == n, "symmetric_eigen: matrix must be square");
  SymmetricEigenResult out;
  if (n == 0) return out;
  const lapack_int wanted = (count <= 0 || count > n) ? n : count;

  out.values.resize(n);
  if (want_vectors) out.vectors.resize(n, wanted);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(wanted));
  lapack_int found = 0;
  const char range = (wanted == n) ? 'A' : 'I';
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', range, 'L', n, matrix.data(), n,
      0.0, 0.0, 1, wanted, 0.0, &found, out.values.data(),
      want_vectors ? out.vectors.data() : nullptr, want_vectors ? n : 1,
      support.data());
  if (info != 0 || found != wanted) {
    throw NumericalError("dsyevr failed (info=" + std::to_string(info) + ")");
  }
  out.values.conservativeResize(wanted);
  return out;
}

}  // namespace qad::linalg
