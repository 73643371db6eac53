#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "collabdict/common.hpp"
#include "collabdict/glasso.hpp"

#include <Eigen/Dense>

using namespace collabdict;
using namespace collabdict::ggm;

namespace {

Eigen::MatrixXd random_spd(Eigen::Index m, Rng& rng, double diag_boost = 1.0) {
  const Eigen::MatrixXd a = rng.gaussian_matrix(m, m);
  Eigen::MatrixXd s = a * a.transpose() / m;
  s.diagonal().array() += diag_boost;
  return s;
}

int offdiag_nonzeros(const Eigen::MatrixXd& m) {
  int count = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) != 0.0) ++count;
  return count;
}

}  // namespace

TEST_CASE("rho = 0 recovers the scaled inverse") {
  Rng rng(7);
  for (double count : {1.0, 5.0, 120.0}) {
    const Eigen::MatrixXd sigma = random_spd(4, rng);
    const Eigen::MatrixXd lambda = graphical_lasso(sigma, 0.0, count);
    const double b = (count + 1.0) / count;
    const Eigen::MatrixXd expected = b * sigma.inverse();
    CHECK((lambda - expected).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("diagonal sigma solves the per-coordinate subproblem") {
  // Stationarity per diagonal coordinate: lambda_ii = b / (sigma_ii + rho/count).
  Eigen::VectorXd diag(3);
  diag << 0.5, 2.0, 7.5;
  const Eigen::MatrixXd sigma = diag.asDiagonal();
  const double rho = 0.8;
  const double count = 4.0;
  const double b = (count + 1.0) / count;
  const Eigen::MatrixXd lambda = graphical_lasso(sigma, rho, count);
  CHECK(offdiag_nonzeros(lambda) == 0);
  for (Eigen::Index i = 0; i < 3; ++i)
    CHECK(lambda(i, i) ==
          doctest::Approx(b / (diag[i] + rho / count)).epsilon(1e-8));
}

TEST_CASE("one-dimensional problem") {
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(1, 1, 2.0);
  const Eigen::MatrixXd lambda = graphical_lasso(sigma, 1.0, 1.0);
  // b = 2, penalty = 1: lambda = 2 / (2 + 1).
  CHECK(lambda(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("KKT stationarity holds across penalties") {
  Rng rng(21);
  for (Eigen::Index m : {2, 4, 6}) {
    const Eigen::MatrixXd sigma = random_spd(m, rng);
    for (double rho : {0.01, 0.1, 1.0}) {
      const double count = 25.0;
      const Eigen::MatrixXd lambda = graphical_lasso(sigma, rho, count);
      CHECK(glasso_kkt_residual(lambda, sigma, rho, count) < 1e-5);
      Eigen::LLT<Eigen::MatrixXd> llt(lambda);
      CHECK(llt.info() == Eigen::Success);
    }
  }
}

TEST_CASE("off-diagonal support shrinks monotonically with rho") {
  Rng rng(5);
  const Eigen::MatrixXd sigma = random_spd(5, rng, 0.5);
  const double count = 10.0;
  int previous = 5 * 4;
  bool reached_zero = false;
  for (double rho : {0.0, 0.05, 0.2, 1.0, 5.0, 50.0}) {
    const Eigen::MatrixXd lambda = graphical_lasso(sigma, rho, count);
    const int nonzeros = offdiag_nonzeros(lambda);
    CHECK(nonzeros <= previous);
    previous = nonzeros;
    reached_zero = reached_zero || nonzeros == 0;
  }
  CHECK(reached_zero);
}

TEST_CASE("input validation") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.3, 0.0, 1.0;
  CHECK_THROWS_AS(graphical_lasso(asym, 0.1, 1.0), std::invalid_argument);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(graphical_lasso(id, 0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(graphical_lasso(id, -0.1, 1.0), std::invalid_argument);
}

TEST_CASE("solution is symmetric positive definite with exact zeros") {
  Rng rng(33);
  const Eigen::MatrixXd sigma = random_spd(6, rng, 0.25);
  const Eigen::MatrixXd lambda = graphical_lasso(sigma, 2.0, 8.0);
  CHECK((lambda - lambda.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lambda);
  CHECK(solver.eigenvalues().minCoeff() > 0.0);
}
