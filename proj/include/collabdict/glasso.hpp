#pragma once

#include <Eigen/Dense>

namespace collabdict::ggm {

struct GlassoOptions {
  int max_sweeps = 2000;
  double tol = 1e-11;        // outer sweep change, relative to the data scale
  double inner_tol = 1e-13;  // coordinate-descent change on beta
  int inner_max_iter = 10000;
};

/// Maximizer of  b ln|Lambda| - Tr(Lambda Sigma) - (rho/count) |Lambda|_1
/// with b = (count+1)/count and the l1 norm over all entries. Solved as a
/// standard graphical lasso on Sigma/b with penalty rho/(count*b): block
/// coordinate descent over columns, soft-thresholded coordinate updates in
/// the inner lasso. Sigma must be symmetric positive definite (callers add a
/// ridge to degenerate scatter matrices first).
Eigen::MatrixXd graphical_lasso(const Eigen::MatrixXd& sigma, double rho,
                                double count, const GlassoOptions& options = {});

/// Max-norm violation of the stationarity conditions at lambda:
/// b (Lambda^{-1})_ij - Sigma_ij equals (rho/count) sign(Lambda_ij) on the
/// support (diagonal included) and lies within +-(rho/count) elsewhere.
double glasso_kkt_residual(const Eigen::MatrixXd& lambda,
                           const Eigen::MatrixXd& sigma, double rho,
                           double count);

}  // namespace collabdict::ggm
