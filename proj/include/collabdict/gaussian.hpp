#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "collabdict/common.hpp"

namespace collabdict {

/// log N(x | mean, precision^{-1}) for a symmetric positive definite
/// precision matrix; the log-determinant comes from the Cholesky factor.
inline double log_mvn_precision(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& mean,
                                const Eigen::MatrixXd& precision) {
  const Eigen::Index m = x.size();
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("precision matrix is not positive definite");
  const double log_det =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Eigen::VectorXd centered = x - mean;
  const double quad = centered.dot(precision * centered);
  return -0.5 * m * std::log(2.0 * M_PI) + 0.5 * log_det - 0.5 * quad;
}

/// log N(x | mean, diag(scale)^2) for elementwise positive scale.
inline double log_mvn_diag(const Eigen::VectorXd& x,
                           const Eigen::VectorXd& mean,
                           const Eigen::VectorXd& scale) {
  const Eigen::Index m = x.size();
  const Eigen::ArrayXd z = (x - mean).array() / scale.array();
  return -0.5 * m * std::log(2.0 * M_PI) - scale.array().log().sum() -
         0.5 * z.square().sum();
}

}  // namespace collabdict
