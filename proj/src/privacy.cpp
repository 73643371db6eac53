#include "collabdict/privacy.hpp"

#include "collabdict/common.hpp"
#include "collabdict/gaussian.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace collabdict::privacy {

PosteriorMu posterior_mu(double lambda0, const Eigen::VectorXd& prior_mean,
                         double count, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& precision) {
  if (!(lambda0 > 0.0))
    throw std::invalid_argument("posterior_mu: lambda0 must be > 0");
  if (count < 0.0)
    throw std::invalid_argument("posterior_mu: count must be >= 0");
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("posterior_mu: precision not positive definite");
  PosteriorMu posterior;
  posterior.lambda = lambda0 + count;
  posterior.mean = (lambda0 * prior_mean + count * mean) / posterior.lambda;
  posterior.precision = posterior.lambda * precision;
  return posterior;
}

double kl_same_cov(const Eigen::VectorXd& w, const Eigen::VectorXd& w_tilde,
                   double lambda, const Eigen::MatrixXd& precision) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("kl_same_cov: precision not positive definite");
  const Eigen::VectorXd shift = w - w_tilde;
  return 0.5 * lambda * shift.dot(precision * shift);
}

double norm_bound_curve(double t, double f_at_identity, double b, double c,
                        double h) {
  const double a = 1.0 + h / c;
  return t - a * b * std::log(t) - a * f_at_identity;
}

double lambda_norm_bound(double f_at_identity, double b, double c, double h) {
  if (!(b > 0.0) || !(c > 0.0))
    throw std::invalid_argument("lambda_norm_bound: b and c must be > 0");
  if (h < 0.0)
    throw std::invalid_argument("lambda_norm_bound: h must be >= 0");
  const double a = 1.0 + h / c;
  const double t_min = a * b;  // minimum of g; the largest root lies beyond it
  const auto g = [&](double t) {
    return norm_bound_curve(t, f_at_identity, b, c, h);
  };

  const double at_min = g(t_min);
  if (std::abs(at_min) < 1e-12 * std::max(1.0, t_min)) return t_min;
  if (at_min > 0.0)
    throw ConvergenceError(
        "lambda_norm_bound: no root beyond the curve minimum", at_min);

  double lo = t_min;
  double hi = t_min;
  for (int i = 0; i < 400 && g(hi) < 0.0; ++i) hi *= 2.0;
  if (g(hi) < 0.0)
    throw ConvergenceError("lambda_norm_bound: no positive root bracket",
                           g(hi));
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (g(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return hi >= t_min ? hi : t_min;
}

double component_norm_bound(const Eigen::MatrixXd& solver_sigma, double count,
                            const ggm::GgmHyper& hyper,
                            double participant_scale) {
  if (!(hyper.rho > 0.0))
    throw std::invalid_argument(
        "component_norm_bound: the bound needs rho > 0");
  if (!(hyper.delta > 0.0))
    throw std::invalid_argument(
        "component_norm_bound: the bound needs delta > 0");
  const Eigen::Index m = solver_sigma.rows();
  const double b = m * (1.0 + 1.0 / hyper.delta);
  const double c = hyper.rho / participant_scale;
  const double f_at_identity =
      solver_sigma.trace() + (hyper.rho / count) * m;
  const Eigen::MatrixXd deviation =
      solver_sigma - Eigen::MatrixXd::Identity(m, m);
  const double h = deviation.cwiseAbs().maxCoeff();
  return lambda_norm_bound(f_at_identity, b, c, h);
}

PrivacyBudget epsilon_bound(int pattern_count, double norm_bound,
                            double radius, double lambda0) {
  if (pattern_count <= 0 || !(norm_bound > 0.0) || !(radius > 0.0) ||
      !(lambda0 > 0.0))
    throw std::invalid_argument("epsilon_bound: all inputs must be positive");
  PrivacyBudget budget;
  budget.pattern_count = pattern_count;
  budget.norm_bound = norm_bound;
  budget.radius = radius;
  budget.lambda0 = lambda0;
  budget.epsilon =
      pattern_count * norm_bound * radius * radius / (2.0 * lambda0);
  return budget;
}

DiversityReport entropy_diversity(const ggm::Dataset& data,
                                  const std::vector<Eigen::VectorXd>& means,
                                  const std::vector<Eigen::MatrixXd>& precisions,
                                  double ell0) {
  if (data.rows() == 0)
    throw std::invalid_argument("entropy_diversity: empty dataset");
  if (means.empty() || means.size() != precisions.size())
    throw std::invalid_argument("entropy_diversity: malformed patterns");
  if (!(ell0 > 0.0))
    throw std::invalid_argument("entropy_diversity: ell0 must be > 0");

  const Eigen::Index n = data.rows();
  const int k = static_cast<int>(means.size());
  DiversityReport report;
  report.entropies.resize(k);
  for (int c = 0; c < k; ++c) {
    Eigen::VectorXd log_density(n);
    for (Eigen::Index i = 0; i < n; ++i)
      log_density[i] =
          log_mvn_precision(data.row(i).transpose(), means[c], precisions[c]);
    const double norm = log_sum_exp(log_density);
    const Eigen::ArrayXd weights = (log_density.array() - norm).exp();
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (weights[i] > 0.0) entropy -= weights[i] * std::log(weights[i]);
    report.entropies[c] = entropy;
  }
  report.max_entropy = report.entropies.maxCoeff();
  report.threshold = std::log(ell0);
  report.pass = report.max_entropy >= report.threshold;
  return report;
}

double data_radius(const ggm::Dataset& pooled, double quantile) {
  const Eigen::Index n = pooled.rows();
  if (n == 0) throw std::invalid_argument("data_radius: empty dataset");
  if (!(quantile > 0.0 && quantile <= 1.0))
    throw std::invalid_argument("data_radius: quantile must be in (0, 1]");

  Eigen::VectorXd median(pooled.cols());
  for (Eigen::Index j = 0; j < pooled.cols(); ++j) {
    std::vector<double> column(pooled.col(j).data(),
                               pooled.col(j).data() + n);
    std::nth_element(column.begin(), column.begin() + n / 2, column.end());
    median[j] = column[n / 2];
  }

  std::vector<double> distances(n);
  for (Eigen::Index i = 0; i < n; ++i)
    distances[i] = (pooled.row(i).transpose() - median).norm();
  std::vector<double> sorted = distances;
  std::sort(sorted.begin(), sorted.end());
  const Eigen::Index cut = std::min<Eigen::Index>(
      n - 1, static_cast<Eigen::Index>(std::ceil(quantile * n)) - 1);
  const double limit = sorted[std::max<Eigen::Index>(cut, 0)];

  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < n; ++i)
    if (distances[i] <= limit) kept.push_back(i);

  double radius = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (std::size_t j = i + 1; j < kept.size(); ++j)
      radius = std::max(
          radius, (pooled.row(kept[i]) - pooled.row(kept[j])).norm());
  return radius;
}

AuditResult perturbation_audit(const ggm::GgmGlobal& global,
                               const ggm::Aggregates& aggregates,
                               const std::vector<ggm::Dataset>& datasets,
                               const std::vector<ggm::GgmLocal>& locals,
                               double radius, double epsilon, int trials,
                               std::uint64_t seed) {
  if (trials < 1)
    throw std::invalid_argument("perturbation_audit: trials must be >= 1");
  if (datasets.size() != locals.size())
    throw std::invalid_argument("perturbation_audit: dataset/local mismatch");
  const int k = global.pattern_count();
  const Eigen::Index m = global.dim();
  const double lambda0 = global.hyper.lambda0;
  const Eigen::VectorXd m0 = global.hyper.prior_mean.size() == 0
                                 ? Eigen::VectorXd::Zero(m)
                                 : global.hyper.prior_mean;

  std::vector<PosteriorMu> posteriors;
  for (int c = 0; c < k; ++c)
    posteriors.push_back(posterior_mu(lambda0, m0, aggregates.counts[c],
                                      aggregates.means[c],
                                      global.precisions[c]));

  Rng rng(seed);
  AuditResult result{trials, 0, 0.0, epsilon};
  for (int trial = 0; trial < trials; ++trial) {
    const int s = rng.uniform_int(static_cast<int>(datasets.size()));
    const int n =
        rng.uniform_int(static_cast<int>(datasets[s].rows()));
    Eigen::VectorXd direction = rng.gaussian_vector(m);
    direction.normalize();
    const double magnitude = radius * (1.0 - rng.uniform());  // (0, radius]
    const Eigen::VectorXd delta = magnitude * direction;

    double kl = 0.0;
    for (int c = 0; c < k; ++c) {
      // Perturbing one sample moves the posterior mean by (r/lambda) * delta
      // when the responsibilities stay frozen at their trained values.
      const double r = locals[s].responsibilities(n, c);
      const Eigen::VectorXd shifted =
          posteriors[c].mean - (r / posteriors[c].lambda) * delta;
      kl += kl_same_cov(posteriors[c].mean, shifted, posteriors[c].lambda,
                        global.precisions[c]);
    }
    result.max_kl = std::max(result.max_kl, kl);
    if (kl > epsilon) ++result.violations;
  }
  return result;
}

PrivacyReport privacy_report(const ggm::GgmGlobal& global,
                             const ggm::Aggregates& aggregates,
                             const std::vector<ggm::Dataset>& datasets,
                             const std::vector<ggm::GgmLocal>& locals,
                             const PrivacyOptions& options) {
  const int k = global.pattern_count();
  Eigen::Index total = 0;
  Eigen::Index max_samples = 0;
  for (const ggm::Dataset& d : datasets) {
    total += d.rows();
    max_samples = std::max(max_samples, d.rows());
  }
  ggm::Dataset pooled(total, global.dim());
  Eigen::Index at = 0;
  for (const ggm::Dataset& d : datasets) {
    pooled.middleRows(at, d.rows()) = d;
    at += d.rows();
  }

  PrivacyReport report;
  report.delta = global.hyper.delta;
  const double radius = data_radius(pooled, options.radius_quantile);
  const double participant_scale =
      static_cast<double>(datasets.size()) * static_cast<double>(max_samples);

  double bound = 0.0;
  for (int c = 0; c < k; ++c) {
    const Eigen::MatrixXd sigma = ggm::solver_covariance(
        aggregates.counts[c], aggregates.means[c], aggregates.scatters[c],
        global.hyper);
    ComponentBound component;
    component.bound = component_norm_bound(sigma, aggregates.counts[c],
                                           global.hyper, participant_scale);
    component.norm = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                         global.precisions[c])
                         .eigenvalues()
                         .cwiseAbs()
                         .maxCoeff();
    const Eigen::MatrixXd deviation =
        sigma - Eigen::MatrixXd::Identity(global.dim(), global.dim());
    component.g_at_bound = norm_bound_curve(
        component.bound,
        sigma.trace() + (global.hyper.rho / aggregates.counts[c]) * global.dim(),
        global.dim() * (1.0 + 1.0 / global.hyper.delta),
        global.hyper.rho / participant_scale,
        deviation.cwiseAbs().maxCoeff());
    report.components.push_back(component);
    bound = std::max(bound, component.bound);
  }

  report.budget = epsilon_bound(k, bound, radius, global.hyper.lambda0);
  report.audit =
      perturbation_audit(global, aggregates, datasets, locals, radius,
                         report.budget.epsilon, options.audit_trials,
                         options.seed);

  report.noise_recommended = false;
  for (const ggm::Dataset& d : datasets) {
    report.diversity.push_back(
        entropy_diversity(d, aggregates.means, global.precisions, options.ell0));
    if (!report.diversity.back().pass) report.noise_recommended = true;
  }
  return report;
}

}  // namespace collabdict::privacy
