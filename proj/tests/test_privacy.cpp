#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "collabdict/common.hpp"
#include "collabdict/ggm.hpp"
#include "collabdict/privacy.hpp"

#include "support/oracles.hpp"

#include <cmath>

using namespace collabdict;
using namespace collabdict::privacy;

namespace {

Eigen::MatrixXd random_spd(Eigen::Index m, Rng& rng) {
  const Eigen::MatrixXd a = rng.gaussian_matrix(m, m);
  return a * a.transpose() + Eigen::MatrixXd::Identity(m, m);
}

}  // namespace

TEST_CASE("posterior_mu: no data keeps the prior") {
  const Eigen::VectorXd m0 = Eigen::VectorXd::Constant(2, 1.5);
  const PosteriorMu posterior = posterior_mu(
      2.0, m0, 0.0, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  CHECK((posterior.mean - m0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(posterior.lambda == doctest::Approx(2.0));
}

TEST_CASE("posterior_mu: one-dimensional arithmetic") {
  const PosteriorMu posterior = posterior_mu(
      1.0, Eigen::VectorXd::Zero(1), 1.0, Eigen::VectorXd::Constant(1, 2.0),
      Eigen::MatrixXd::Identity(1, 1));
  CHECK(posterior.mean[0] == doctest::Approx(1.0));
  CHECK(posterior.lambda == doctest::Approx(2.0));
}

TEST_CASE("posterior_mu: covariance matches a numerical inverse") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd lambda_k = random_spd(3, rng);
    const double count = 4.0 + rng.uniform();
    const PosteriorMu posterior =
        posterior_mu(0.5, rng.gaussian_vector(3), count,
                     rng.gaussian_vector(3), lambda_k);
    const Eigen::MatrixXd covariance = posterior.precision.inverse();
    const Eigen::MatrixXd expected =
        ((0.5 + count) * lambda_k).inverse();
    CHECK((covariance - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("posterior_mu: rejects non-positive lambda0") {
  CHECK_THROWS_AS(posterior_mu(0.0, Eigen::VectorXd::Zero(1), 1.0,
                               Eigen::VectorXd::Zero(1),
                               Eigen::MatrixXd::Identity(1, 1)),
                  std::invalid_argument);
}

TEST_CASE("posterior_mu mean equals the model's MAP mean") {
  ggm::GgmHyper hyper;
  hyper.lambda0 = 1.25;
  hyper.rho = 0.0;
  ggm::Aggregates agg;
  agg.counts = Eigen::VectorXd::Constant(1, 7.0);
  agg.means = {Eigen::VectorXd::Constant(2, 3.0)};
  agg.scatters = {Eigen::MatrixXd::Identity(2, 2) +
                  agg.means[0] * agg.means[0].transpose()};
  const ggm::GgmGlobal global = ggm::optimize_global(agg, hyper);
  const PosteriorMu posterior =
      posterior_mu(hyper.lambda0, Eigen::VectorXd::Zero(2), agg.counts[0],
                   agg.means[0], global.precisions[0]);
  CHECK((posterior.mean - global.means[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kl_same_cov: zero at equal means, hand value, oracle match") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.3);
  CHECK(kl_same_cov(w, w, 2.0, id) == doctest::Approx(0.0));

  Eigen::VectorXd w_tilde = w;
  w_tilde[0] += 1.0;
  CHECK(kl_same_cov(w, w_tilde, 2.0, id) == doctest::Approx(1.0));

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd lambda_k = random_spd(3, rng);
    const double lambda = 0.5 + rng.uniform() * 4.0;
    const Eigen::VectorXd a = rng.gaussian_vector(3);
    const Eigen::VectorXd b = rng.gaussian_vector(3);
    const Eigen::MatrixXd cov = (lambda * lambda_k).inverse();
    const double expected = oracles::gaussian_kl(a, cov, b, cov);
    const double actual = kl_same_cov(a, b, lambda, lambda_k);
    CHECK(actual == doctest::Approx(expected).epsilon(1e-9));
    CHECK(actual >= 0.0);
  }
}

TEST_CASE("kl_same_cov: positive iff the means differ") {
  Rng rng(6);
  const Eigen::MatrixXd lambda_k = random_spd(2, rng);
  const Eigen::VectorXd w = rng.gaussian_vector(2);
  Eigen::VectorXd w2 = w;
  CHECK(kl_same_cov(w, w2, 1.0, lambda_k) <= 1e-12);
  w2[1] += 1e-3;
  CHECK(kl_same_cov(w, w2, 1.0, lambda_k) > 0.0);

  Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  CHECK_THROWS_AS(kl_same_cov(w, w2, 1.0, indefinite), NumericalError);
}

TEST_CASE("lambda_norm_bound: double root of t - ln t - 1") {
  const double bound = lambda_norm_bound(1.0, 1.0, 1.0, 0.0);
  CHECK(bound == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("lambda_norm_bound: root certificate") {
  const double f_at_identity = 4.0;
  const double b = 2.0;
  const double c = 0.5;
  const double h = 1.0;
  const double bound = lambda_norm_bound(f_at_identity, b, c, h);
  CHECK(std::abs(norm_bound_curve(bound, f_at_identity, b, c, h)) < 1e-9);
  CHECK(norm_bound_curve(bound + 1.0, f_at_identity, b, c, h) > 0.0);
  CHECK(bound >= (1.0 + h / c) * b);
}

TEST_CASE("lambda_norm_bound: strictly increasing in f_at_identity") {
  double previous = 0.0;
  for (double f : {2.0, 3.0, 5.0, 9.0, 17.0}) {
    const double bound = lambda_norm_bound(f, 1.5, 1.0, 0.5);
    CHECK(bound > previous);
    previous = bound;
  }
}

TEST_CASE("lambda_norm_bound: inconsistent inputs have no root") {
  // g at its minimum is 1 - 0 - f, positive for f < 1: nothing to bound.
  CHECK_THROWS_AS(lambda_norm_bound(0.5, 1.0, 1.0, 0.0), ConvergenceError);
  CHECK_THROWS_AS(lambda_norm_bound(1.0, -1.0, 1.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(lambda_norm_bound(1.0, 1.0, 0.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("epsilon_bound: formula arithmetic and scaling") {
  const PrivacyBudget budget = epsilon_bound(1, 1.0, 1.0, 0.5);
  CHECK(budget.epsilon == doctest::Approx(1.0));

  const PrivacyBudget base = epsilon_bound(3, 2.0, 1.5, 1.0);
  const PrivacyBudget doubled = epsilon_bound(3, 2.0, 3.0, 1.0);
  CHECK(doubled.epsilon == doctest::Approx(4.0 * base.epsilon));

  CHECK_THROWS_AS(epsilon_bound(0, 1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(epsilon_bound(1, 1.0, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("entropy_diversity: identical samples reach the maximum entropy") {
  ggm::Dataset data(5, 2);
  for (int i = 0; i < 5; ++i) data.row(i) << 1.0, -2.0;
  const DiversityReport report = entropy_diversity(
      data, {Eigen::VectorXd::Zero(2)}, {Eigen::MatrixXd::Identity(2, 2)},
      2.0);
  CHECK(report.max_entropy == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(report.pass);
}

TEST_CASE("entropy_diversity: one dominant sample collapses the entropy") {
  ggm::Dataset data(4, 1);
  data << 0.0, 1e6, 1e6, 1e6;
  const DiversityReport report = entropy_diversity(
      data, {Eigen::VectorXd::Zero(1)}, {Eigen::MatrixXd::Identity(1, 1)},
      2.0);
  CHECK(report.max_entropy < 0.1);
  CHECK_FALSE(report.pass);
}

TEST_CASE("entropy_diversity: two balanced samples give ln 2") {
  ggm::Dataset data(2, 1);
  data << 0.5, -0.5;
  const DiversityReport report = entropy_diversity(
      data, {Eigen::VectorXd::Zero(1)}, {Eigen::MatrixXd::Identity(1, 1)},
      2.0);
  CHECK(report.max_entropy == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("entropy_diversity: entropies stay within [0, ln N]") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + rng.uniform_int(20);
    ggm::Dataset data = rng.gaussian_matrix(n, 2);
    const DiversityReport report = entropy_diversity(
        data, {rng.gaussian_vector(2)}, {random_spd(2, rng)}, 2.0);
    CHECK(report.entropies.minCoeff() >= 0.0);
    CHECK(report.entropies.maxCoeff() <= std::log(double(n)) + 1e-12);
  }
  CHECK_THROWS_AS(entropy_diversity(ggm::Dataset(0, 2),
                                    {Eigen::VectorXd::Zero(2)},
                                    {Eigen::MatrixXd::Identity(2, 2)}, 2.0),
                  std::invalid_argument);
}

TEST_CASE("entropy_diversity: pass flag flips exactly at ln ell0") {
  ggm::Dataset data(4, 1);
  data << 0.1, -0.1, 0.2, -0.2;
  const DiversityReport base = entropy_diversity(
      data, {Eigen::VectorXd::Zero(1)}, {Eigen::MatrixXd::Identity(1, 1)},
      2.0);
  const double just_below = std::exp(base.max_entropy - 1e-9);
  const double just_above = std::exp(base.max_entropy + 1e-9);
  CHECK(entropy_diversity(data, {Eigen::VectorXd::Zero(1)},
                          {Eigen::MatrixXd::Identity(1, 1)}, just_below)
            .pass);
  CHECK_FALSE(entropy_diversity(data, {Eigen::VectorXd::Zero(1)},
                                {Eigen::MatrixXd::Identity(1, 1)}, just_above)
                  .pass);
}

TEST_CASE("data_radius: pairwise maximum after outlier removal") {
  ggm::Dataset data(5, 1);
  data << 0.0, 1.0, 2.0, 3.0, 1000.0;
  // With a 0.8 quantile the far point drops, leaving the 0..3 range.
  CHECK(data_radius(data, 0.8) == doctest::Approx(3.0));
  // Keeping everything measures the raw span.
  CHECK(data_radius(data, 1.0) == doctest::Approx(1000.0));
}

TEST_CASE("end-to-end: fitted model respects the bound and the audit") {
  Rng rng(31);
  const int participants = 4;
  std::vector<ggm::Dataset> datasets;
  std::vector<Eigen::VectorXd> centers{Eigen::VectorXd::Zero(2),
                                       Eigen::VectorXd::Constant(2, 4.0)};
  for (int s = 0; s < participants; ++s) {
    ggm::Dataset data(60, 2);
    for (int i = 0; i < 60; ++i) {
      const int c = rng.uniform() < 0.5 ? 0 : 1;
      data.row(i) = (centers[c] + 0.5 * rng.gaussian_vector(2)).transpose();
    }
    datasets.push_back(std::move(data));
  }

  ggm::FitOptions options;
  options.pattern_count = 2;
  options.hyper.rho = 0.2;
  options.hyper.delta = 1.0;
  options.seed = 17;
  options.exact_aggregation = true;
  const ggm::FitResult fitted = ggm::fit(datasets, nullptr, options);

  PrivacyOptions privacy_options;
  privacy_options.audit_trials = 100;
  privacy_options.seed = 99;
  const PrivacyReport report =
      privacy_report(fitted.global, fitted.aggregates, datasets,
                     fitted.locals, privacy_options);

  for (const ComponentBound& component : report.components) {
    CHECK(component.norm <= component.bound);
    CHECK(std::abs(component.g_at_bound) < 1e-9);
  }
  CHECK(report.audit.violations == 0);
  CHECK(report.audit.max_kl <= report.budget.epsilon);
  CHECK(report.budget.epsilon > 0.0);
  CHECK(report.diversity.size() == participants);
}
