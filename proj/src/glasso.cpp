#include "collabdict/glasso.hpp"

#include "collabdict/common.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace collabdict::ggm {

namespace {

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

void validate_inputs(const Eigen::MatrixXd& sigma, double rho, double count) {
  if (sigma.rows() != sigma.cols())
    throw std::invalid_argument("graphical lasso: sigma must be square");
  if (!(count > 0.0))
    throw std::invalid_argument("graphical lasso: count must be > 0");
  if (rho < 0.0)
    throw std::invalid_argument("graphical lasso: rho must be >= 0");
  if (!sigma.allFinite())
    throw std::invalid_argument("graphical lasso: sigma must be finite");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * (1.0 + sigma.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("graphical lasso: sigma must be symmetric");
}

}  // namespace

Eigen::MatrixXd graphical_lasso(const Eigen::MatrixXd& sigma, double rho,
                                double count, const GlassoOptions& options) {
  validate_inputs(sigma, rho, count);
  const Eigen::Index m = sigma.rows();
  const double b = (count + 1.0) / count;

  // Scaled standard form: min -ln|T| + Tr(T S) + alpha |T|_1 with S = sigma/b
  // and alpha = rho/(count*b); the solution T equals the target Lambda.
  const Eigen::MatrixXd s = sigma / b;
  const double alpha = rho / (count * b);

  if (m == 1) {
    const double denom = s(0, 0) + alpha;
    if (!(denom > 0.0))
      throw NumericalError("graphical lasso: non-positive 1x1 problem");
    return Eigen::MatrixXd::Constant(1, 1, 1.0 / denom);
  }

  const double scale = 1.0 + s.cwiseAbs().maxCoeff();
  Eigen::MatrixXd w = s;
  w.diagonal().array() += alpha;
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(m, m);  // column j: lasso coefs

  double sweep_change = 0.0;
  bool converged = false;
  for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    sweep_change = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      // Inner lasso on column j: min 0.5 b' W11 b' - s12.b' + alpha |b'|_1.
      for (int it = 0; it < options.inner_max_iter; ++it) {
        double inner_change = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
          if (i == j) continue;
          double residual = s(i, j);
          for (Eigen::Index k = 0; k < m; ++k) {
            if (k == j || k == i) continue;
            residual -= w(i, k) * beta(k, j);
          }
          const double updated = soft_threshold(residual, alpha) / w(i, i);
          inner_change = std::max(inner_change, std::abs(updated - beta(i, j)));
          beta(i, j) = updated;
        }
        if (inner_change < options.inner_tol * scale) break;
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        if (i == j) continue;
        double w12 = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
          if (k == j) continue;
          w12 += w(i, k) * beta(k, j);
        }
        sweep_change = std::max(sweep_change, std::abs(w(i, j) - w12));
        w(i, j) = w12;
        w(j, i) = w12;
      }
    }
    converged = sweep_change < options.tol * scale;
  }
  if (!converged)
    throw ConvergenceError("graphical lasso: sweeps exhausted", sweep_change);

  // Recover the precision matrix from W and the final column coefficients.
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double cross = 0.0;
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != j) cross += w(k, j) * beta(k, j);
    const double theta_jj = 1.0 / (w(j, j) - cross);
    if (!(theta_jj > 0.0))
      throw NumericalError("graphical lasso: lost positive definiteness");
    lambda(j, j) = theta_jj;
    for (Eigen::Index i = 0; i < m; ++i)
      if (i != j) lambda(i, j) = -beta(i, j) * theta_jj;
  }
  lambda = ((lambda + lambda.transpose()) / 2.0).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(lambda);
  if (llt.info() != Eigen::Success)
    throw NumericalError("graphical lasso: result not positive definite");
  return lambda;
}

double glasso_kkt_residual(const Eigen::MatrixXd& lambda,
                           const Eigen::MatrixXd& sigma, double rho,
                           double count) {
  const Eigen::Index m = sigma.rows();
  const double b = (count + 1.0) / count;
  const double penalty = rho / count;
  Eigen::LLT<Eigen::MatrixXd> llt(lambda);
  if (llt.info() != Eigen::Success)
    throw NumericalError("kkt residual: lambda not positive definite");
  const Eigen::MatrixXd inverse =
      llt.solve(Eigen::MatrixXd::Identity(m, m));
  const double support_eps = 1e-9 * (1.0 + lambda.cwiseAbs().maxCoeff());

  double residual = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double t = b * inverse(i, j) - sigma(i, j);
      double violation = 0.0;
      if (i == j) {
        violation = std::abs(t - penalty);
      } else if (std::abs(lambda(i, j)) > support_eps) {
        violation = std::abs(t - penalty * (lambda(i, j) > 0 ? 1.0 : -1.0));
      } else {
        violation = std::max(0.0, std::abs(t) - penalty);
      }
      residual = std::max(residual, violation);
    }
  }
  return residual;
}

}  // namespace collabdict::ggm
