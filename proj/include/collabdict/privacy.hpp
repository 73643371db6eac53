#pragma once

#include "collabdict/ggm.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace collabdict::privacy {

/// Gaussian posterior of a pattern mean: N(w, (lambda * precision)^{-1}).
/// The posterior mean coincides with the MAP estimate used by the model.
struct PosteriorMu {
  Eigen::VectorXd mean;       // w_k
  double lambda;              // lambda0 + aggregated count
  Eigen::MatrixXd precision;  // lambda * Lambda_k
};

PosteriorMu posterior_mu(double lambda0, const Eigen::VectorXd& prior_mean,
                         double count, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& precision);

/// KL divergence between two pattern-mean posteriors sharing a covariance:
/// 0.5 * lambda * (w - w~)' Lambda (w - w~).
double kl_same_cov(const Eigen::VectorXd& w, const Eigen::VectorXd& w_tilde,
                   double lambda, const Eigen::MatrixXd& precision);

/// g(t) = t - (1 + h/c) b ln t - (1 + h/c) f_at_identity. The precision-norm
/// bound is the largest root of g on t >= (1 + h/c) b.
double norm_bound_curve(double t, double f_at_identity, double b, double c,
                        double h);

/// Largest root of norm_bound_curve, located by bracketing and bisection to
/// machine precision. Throws ConvergenceError when no root exists past the
/// minimum of g (inconsistent inputs).
double lambda_norm_bound(double f_at_identity, double b, double c, double h);

/// Norm-bound inputs for one fitted pattern, derived from the exact
/// covariance handed to the precision solver. participant_scale is
/// S * max_s N^s (the denominator of the penalty floor c).
double component_norm_bound(const Eigen::MatrixXd& solver_sigma, double count,
                            const ggm::GgmHyper& hyper,
                            double participant_scale);

struct PrivacyBudget {
  double epsilon;
  int pattern_count;
  double norm_bound;
  double radius;
  double lambda0;
};

/// epsilon = K B R^2 / (2 lambda0).
PrivacyBudget epsilon_bound(int pattern_count, double norm_bound,
                            double radius, double lambda0);

struct DiversityReport {
  Eigen::VectorXd entropies;  // one per pattern
  double max_entropy;         // E^s
  double threshold;           // ln(ell0)
  bool pass;                  // E^s >= ln(ell0)
};

/// Entropy of the normalized per-sample pattern weights. A participant whose
/// released first moment is dominated by one sample scores a low entropy and
/// fails the ln(ell0) floor.
DiversityReport entropy_diversity(const ggm::Dataset& data,
                                  const std::vector<Eigen::VectorXd>& means,
                                  const std::vector<Eigen::MatrixXd>& precisions,
                                  double ell0);

/// Max pairwise distance after dropping samples whose distance from the
/// coordinate-wise median falls beyond the given quantile.
double data_radius(const ggm::Dataset& pooled, double quantile = 0.99);

struct AuditResult {
  int trials;
  int violations;
  double max_kl;
  double epsilon;
};

/// Empirical differential-privacy audit: random single-sample perturbations
/// of magnitude up to radius, responsibilities frozen at their trained
/// values, posterior-mean KL summed over patterns checked against epsilon.
AuditResult perturbation_audit(const ggm::GgmGlobal& global,
                               const ggm::Aggregates& aggregates,
                               const std::vector<ggm::Dataset>& datasets,
                               const std::vector<ggm::GgmLocal>& locals,
                               double radius, double epsilon, int trials,
                               std::uint64_t seed);

struct ComponentBound {
  double norm;      // measured ||Lambda_k||_2
  double bound;     // B_k
  double g_at_bound;
};

struct PrivacyOptions {
  double ell0 = 2.0;
  int audit_trials = 100;
  std::uint64_t seed = 0;
  double radius_quantile = 0.99;
};

struct PrivacyReport {
  PrivacyBudget budget;
  double delta;
  std::vector<ComponentBound> components;
  std::vector<DiversityReport> diversity;  // per participant
  AuditResult audit;
  bool noise_recommended;  // some participant failed the diversity floor
};

/// Full audit of a fitted GGM: Theorem-style epsilon from the per-component
/// norm bounds, the empirical perturbation audit, and per-participant
/// entropy diversity against the released aggregate means.
PrivacyReport privacy_report(const ggm::GgmGlobal& global,
                             const ggm::Aggregates& aggregates,
                             const std::vector<ggm::Dataset>& datasets,
                             const std::vector<ggm::GgmLocal>& locals,
                             const PrivacyOptions& options);

}  // namespace collabdict::privacy
