#pragma once

#include <Eigen/Dense>

namespace sxlmd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Kronecker product, dense.  Only used for small Lyapunov solves where the
// linearised system stays below ~1600x1600.
inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace sxlmd
