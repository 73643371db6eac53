#pragma once

#include "collabdict/consensus.hpp"
#include "collabdict/glasso.hpp"
#include "collabdict/topology.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace collabdict::ggm {

/// One sample per row, shared column layout across participants.
using Dataset = Eigen::MatrixXd;

struct GgmHyper {
  double lambda0 = 1.0;
  double rho = 0.1;
  Eigen::VectorXd prior_mean;  // m0; empty means the zero vector
  double delta = 1.0;          // components with aggregated count below this are dropped
};

/// Shared pattern dictionary: K Gaussian patterns (mean, precision).
struct GgmGlobal {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> precisions;
  GgmHyper hyper;

  int pattern_count() const { return static_cast<int>(means.size()); }
  Eigen::Index dim() const { return means.empty() ? 0 : means[0].size(); }
};

/// Participant-private state: mixture weights on the simplex and the
/// per-sample responsibility rows (each summing to one).
struct GgmLocal {
  Eigen::VectorXd mixture_weights;
  Eigen::MatrixXd responsibilities;  // N x K
};

/// Aggregable per-participant statistics of one EM half-step.
struct SuffStats {
  Eigen::VectorXd counts;                       // N^s_k
  std::vector<Eigen::VectorXd> first_moments;   // sum_n r x
  std::vector<Eigen::MatrixXd> second_moments;  // sum_n r x x^T
};

/// Network-wide statistics: total counts plus count-normalized moments.
struct Aggregates {
  Eigen::VectorXd counts;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> scatters;
};

/// Posterior pattern weights for one sample, computed in log space with a
/// log-sum-exp normalization so distant patterns underflow harmlessly.
Eigen::VectorXd responsibilities(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& weights,
                                 const GgmGlobal& global);

/// E-step over one participant's dataset: responsibilities, updated mixture
/// weights, and the aggregable statistics.
std::pair<GgmLocal, SuffStats> local_update(const Dataset& data,
                                            const GgmLocal& local,
                                            const GgmGlobal& global);

/// Exact pooling of the per-participant statistics (the consensus limit).
Aggregates pool_stats(const std::vector<SuffStats>& stats);

/// Decentralized pooling: every element of every statistic goes through the
/// consensus session, and each participant receives its own converged view.
std::vector<Aggregates> aggregate(const std::vector<SuffStats>& stats,
                                  consensus::ConsensusSession& session);

/// Indices of components whose aggregated count stays at or above delta.
/// Throws ModelCollapseError when nothing survives.
std::vector<int> prune(const Aggregates& agg, double delta);

Aggregates filter_components(const Aggregates& agg,
                             const std::vector<int>& keep);
GgmGlobal filter_components(const GgmGlobal& global,
                            const std::vector<int>& keep);
GgmLocal filter_components(const GgmLocal& local, const std::vector<int>& keep);

/// Pattern covariance entering the precision subproblem.
Eigen::MatrixXd pattern_covariance(double count, const Eigen::VectorXd& mean,
                                   const Eigen::MatrixXd& scatter,
                                   const GgmHyper& hyper);

/// pattern_covariance with the semidefiniteness guard and ridge applied;
/// exactly the matrix handed to graphical_lasso (and to the norm-bound
/// computation in the privacy module).
Eigen::MatrixXd solver_covariance(double count, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& scatter,
                                  const GgmHyper& hyper);

/// M-step: posterior means and graphical-lasso precisions from aggregates.
/// Deterministic given its inputs; a small ridge keeps degenerate scatter
/// matrices solvable.
GgmGlobal optimize_global(const Aggregates& agg, const GgmHyper& hyper);

/// Pattern-weighted negative log-density of a test sample.
double anomaly_score(const Eigen::VectorXd& x, const Eigen::VectorXd& weights,
                     const GgmGlobal& global);

/// Joint MAP objective (data log-likelihood plus the mean/precision priors);
/// the EM rounds are non-decreasing in this quantity under exact aggregation.
double map_objective(const std::vector<Dataset>& datasets,
                     const GgmGlobal& global,
                     const std::vector<GgmLocal>& locals);

struct FitOptions {
  int pattern_count = 2;
  GgmHyper hyper;
  int max_rounds = 200;
  double param_tol = 1e-5;  // relative change of all means and precisions
  std::uint64_t seed = 0;
  consensus::ConsensusSession::Options consensus;
  bool exact_aggregation = false;  // bypass the network (S=1 and oracle runs)
};

struct FitResult {
  GgmGlobal global;  // participant 0 view
  std::vector<GgmLocal> locals;
  std::vector<GgmGlobal> participant_globals;
  Aggregates aggregates;  // participant 0 view of the final round
  std::vector<double> objective;
  std::vector<int> consensus_iterations;
  std::vector<int> retained;  // surviving original component indices
  int rounds = 0;
  double max_view_divergence = 0.0;
};

/// Shared seeded initialization: pattern means drawn from distinct pooled
/// samples plus small noise, identity precisions.
GgmGlobal initial_global(const std::vector<Dataset>& datasets,
                         int pattern_count, const GgmHyper& hyper,
                         std::uint64_t seed);

/// CollabDict rounds (local update, consensus aggregation, local
/// optimization) until the global parameters settle or max_rounds is hit.
/// graph may be null when exact aggregation is requested or S == 1.
FitResult fit(const std::vector<Dataset>& datasets,
              const topology::Graph* graph, const FitOptions& options);

// --- persistence ---------------------------------------------------------

void save_checkpoint(const GgmGlobal& global,
                     const std::vector<GgmLocal>& locals, std::ostream& out);

struct Checkpoint {
  GgmGlobal global;
  std::vector<Eigen::VectorXd> mixture_weights;  // per participant
};
Checkpoint load_checkpoint(std::istream& in);

/// CSV datasets: one sample per row, optional header line.
Dataset load_csv(std::istream& in);
void save_csv(const Dataset& data, std::ostream& out);

}  // namespace collabdict::ggm
