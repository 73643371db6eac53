#pragma once

#include "collabdict/common.hpp"
#include "collabdict/consensus.hpp"
#include "collabdict/topology.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace collabdict::mtvae {

using Dataset = Eigen::MatrixXd;  // one sample per row

struct MlpSpec {
  Eigen::Index input_dim;
  Eigen::Index hidden_dim;
  Eigen::Index output_dim;
};

/// Fixed two-head architecture: hidden = relu(affine(input)),
/// mean = affine(hidden), scale = softplus(affine(hidden)) > 0.
/// The same container holds parameters and gradients (identical shapes).
struct TwoHeadMlp {
  Eigen::MatrixXd hidden_w;  // hidden x input
  Eigen::VectorXd hidden_b;
  Eigen::MatrixXd mean_w;  // output x hidden
  Eigen::VectorXd mean_b;
  Eigen::MatrixXd scale_w;  // output x hidden
  Eigen::VectorXd scale_b;

  MlpSpec spec() const {
    return {hidden_w.cols(), hidden_w.rows(), mean_w.rows()};
  }
  static TwoHeadMlp zeros(const MlpSpec& spec);
  bool all_finite() const;
};

/// Shared decoder: z in R^d to (mu in R^M, sigma in R^M, sigma > 0).
struct DecoderParams {
  TwoHeadMlp net;
};

/// Per-participant encoder: x in R^M to (m in R^d, h in R^d, h > 0).
struct EncoderParams {
  TwoHeadMlp net;
};

struct ForwardResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

ForwardResult decoder_forward(const DecoderParams& decoder,
                              const Eigen::VectorXd& z);
ForwardResult encoder_forward(const EncoderParams& encoder,
                              const Eigen::VectorXd& x);

/// Variational objective value split into its closed-form Gaussian part
/// (kl_term, equal to minus the KL against the unit prior summed over the
/// dataset) and the Monte-Carlo reconstruction part. Deterministic given the
/// seed; the draws are shared by elbo and elbo_grad.
struct ElboEstimate {
  double value;
  double kl_term;
  double recon_term;
  int mc_samples;
  std::uint64_t seed;
};

ElboEstimate elbo(const EncoderParams& encoder, const DecoderParams& decoder,
                  const Dataset& data, int mc_samples, std::uint64_t seed);

struct ElboGradients {
  TwoHeadMlp encoder;
  TwoHeadMlp decoder;
  ElboEstimate estimate;
};

/// Exact pathwise gradients of the mc_samples-draw objective, by analytic
/// backpropagation through the fixed architecture.
ElboGradients elbo_grad(const EncoderParams& encoder,
                        const DecoderParams& decoder, const Dataset& data,
                        int mc_samples, std::uint64_t seed);

struct LocalSgdResult {
  EncoderParams encoder;    // after the ascent step
  TwoHeadMlp decoder_grad;  // evaluated at the updated encoder
  ElboEstimate estimate;    // at the updated encoder
};

/// One local round: ascend the encoder, then report the decoder gradient at
/// the updated encoder. The decoder itself is untouched.
LocalSgdResult local_sgd(const EncoderParams& encoder,
                         const DecoderParams& decoder, const Dataset& data,
                         double eta, int mc_samples, std::uint64_t seed);

/// Aggregates the per-participant decoder gradients through the consensus
/// session (sum over participants) and applies one ascent step to every
/// participant's decoder copy.
std::vector<DecoderParams> global_step(
    const std::vector<DecoderParams>& decoders,
    const std::vector<TwoHeadMlp>& gradients, double eta,
    consensus::ConsensusSession& session);

/// Reconstruction-probability anomaly score: minus the Monte-Carlo average
/// of the decoder log-density at draws from the encoder posterior.
double anomaly_score_mc(const Eigen::VectorXd& x, const EncoderParams& encoder,
                        const DecoderParams& decoder, int mc_samples,
                        std::uint64_t seed);

Eigen::VectorXd flatten(const TwoHeadMlp& net);
TwoHeadMlp unflatten(const MlpSpec& spec, const Eigen::VectorXd& flat);

/// Hidden and mean-head weights drawn at 1/sqrt(fan_in) scale; the scale
/// heads start at exactly unit output (zero weights, softplus(bias) = 1),
/// which keeps the first gradients bounded on unnormalized data.
DecoderParams init_decoder(const MlpSpec& spec, Rng& rng);
EncoderParams init_encoder(const MlpSpec& spec, Rng& rng);

struct FitOptions {
  Eigen::Index latent_dim = 2;
  Eigen::Index hidden_dim = 16;
  double eta = 1e-3;
  int mc_samples = 8;
  int epochs = 100;
  int minibatch = 0;  // 0 = full batch; otherwise seeded subsampling
  double collapse_threshold = 1e-3;  // mean KL per sample below this flags collapse
  std::uint64_t seed = 0;
  consensus::ConsensusSession::Options consensus;
  bool exact_aggregation = false;
};

struct EpochStats {
  int epoch;
  Eigen::VectorXd objectives;  // per participant
  Eigen::VectorXd kl_terms;    // per participant
  bool collapse_flag;
};

struct FitResult {
  DecoderParams decoder;  // participant 0 view
  std::vector<DecoderParams> participant_decoders;
  std::vector<EncoderParams> encoders;
  std::vector<EpochStats> history;
  std::vector<int> consensus_iterations;  // per epoch
  double max_view_divergence = 0.0;
  bool collapse_warning = false;
};

/// Divergent training (non-finite objective) aborts with the history so far.
struct DivergenceError : NumericalError {
  std::vector<EpochStats> history;
  DivergenceError(const std::string& what, std::vector<EpochStats> history_)
      : NumericalError(what), history(std::move(history_)) {}
};

/// Alternates per-participant local SGD with the consensus decoder update.
/// graph may be null when exact aggregation is requested or S == 1.
FitResult fit(const std::vector<Dataset>& datasets,
              const topology::Graph* graph, const FitOptions& options);

/// CSV rows `epoch,participant,objective,kl_term`.
void write_training_log(const std::vector<EpochStats>& history,
                        std::ostream& out);

void save_checkpoint(const FitResult& result, std::ostream& out);
struct Checkpoint {
  DecoderParams decoder;
  std::vector<EncoderParams> encoders;
  int epochs;
  std::vector<double> objective_history;  // network total per epoch
};
Checkpoint load_checkpoint(std::istream& in);

}  // namespace collabdict::mtvae
