#include "collabdict/mtvae.hpp"

#include "collabdict/gaussian.hpp"

#include <json.hpp>

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace collabdict::mtvae {

namespace {

using nlohmann::json;

Eigen::MatrixXd softplus_m(const Eigen::MatrixXd& a) {
  return a.unaryExpr([](double v) { return softplus(v); });
}

Eigen::MatrixXd sigmoid_m(const Eigen::MatrixXd& a) {
  return a.unaryExpr([](double v) { return sigmoid(v); });
}

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& a) {
  return (a.array() > 0.0).cast<double>().matrix();
}

struct BatchForward {
  Eigen::MatrixXd pre_hidden;  // N x hidden
  Eigen::MatrixXd hidden;      // relu
  Eigen::MatrixXd mean;        // N x out
  Eigen::MatrixXd pre_scale;   // N x out
  Eigen::MatrixXd scale;       // softplus
};

BatchForward batch_forward(const TwoHeadMlp& net, const Eigen::MatrixXd& in) {
  BatchForward f;
  f.pre_hidden =
      (in * net.hidden_w.transpose()).rowwise() + net.hidden_b.transpose();
  f.hidden = f.pre_hidden.cwiseMax(0.0);
  f.mean = (f.hidden * net.mean_w.transpose()).rowwise() + net.mean_b.transpose();
  f.pre_scale =
      (f.hidden * net.scale_w.transpose()).rowwise() + net.scale_b.transpose();
  f.scale = softplus_m(f.pre_scale);
  return f;
}

void check_dims(const EncoderParams& encoder, const DecoderParams& decoder,
                const Dataset& data) {
  const MlpSpec enc = encoder.net.spec();
  const MlpSpec dec = decoder.net.spec();
  if (data.rows() == 0) throw std::invalid_argument("mtvae: empty dataset");
  if (data.cols() != enc.input_dim)
    throw std::invalid_argument("mtvae: encoder input dimension mismatch");
  if (enc.output_dim != dec.input_dim)
    throw std::invalid_argument("mtvae: latent dimension mismatch");
  if (dec.output_dim != data.cols())
    throw std::invalid_argument("mtvae: decoder output dimension mismatch");
}

// Shared core of elbo and elbo_grad: one pass with common Monte-Carlo draws.
ElboGradients evaluate(const EncoderParams& encoder,
                       const DecoderParams& decoder, const Dataset& data,
                       int mc_samples, std::uint64_t seed, bool with_grad) {
  check_dims(encoder, decoder, data);
  if (mc_samples < 1)
    throw std::invalid_argument("mtvae: mc_samples must be >= 1");

  const Eigen::Index n = data.rows();
  const Eigen::Index m = data.cols();
  const Eigen::Index d = encoder.net.spec().output_dim;
  const double inv_j = 1.0 / mc_samples;

  Rng rng(seed);
  const Eigen::MatrixXd draws = rng.gaussian_matrix(mc_samples, d);

  const BatchForward enc = batch_forward(encoder.net, data);
  const Eigen::MatrixXd& mu_z = enc.mean;   // m_phi(x)
  const Eigen::MatrixXd& h = enc.scale;     // h_phi(x)

  const double kl_term =
      0.5 * (2.0 * h.array().log().sum() + static_cast<double>(n * d) -
             h.array().square().sum() - mu_z.array().square().sum());

  Eigen::MatrixXd d_mu_z = -mu_z;  // d kl / d m
  Eigen::MatrixXd d_h = (h.array().inverse() - h.array()).matrix();

  ElboGradients out;
  if (with_grad) {
    out.decoder = TwoHeadMlp::zeros(decoder.net.spec());
  }

  double recon_term = 0.0;
  for (int j = 0; j < mc_samples; ++j) {
    const Eigen::VectorXd v = draws.row(j).transpose();
    const Eigen::MatrixXd z =
        (h.array().rowwise() * v.transpose().array()).matrix() + mu_z;

    const BatchForward dec = batch_forward(decoder.net, z);
    const Eigen::MatrixXd residual = data - dec.mean;
    const Eigen::ArrayXXd ratio = residual.array() / dec.scale.array();
    recon_term += inv_j * (-0.5 * static_cast<double>(n * m) *
                               std::log(2.0 * M_PI) -
                           dec.scale.array().log().sum() -
                           0.5 * ratio.square().sum());
    if (!with_grad) continue;

    const Eigen::MatrixXd d_mu_x =
        (residual.array() / dec.scale.array().square()).matrix();
    const Eigen::MatrixXd d_scale =
        (-dec.scale.array().inverse() +
         residual.array().square() / dec.scale.array().cube())
            .matrix();
    const Eigen::MatrixXd d_pre_scale =
        d_scale.cwiseProduct(sigmoid_m(dec.pre_scale));

    out.decoder.mean_w += inv_j * d_mu_x.transpose() * dec.hidden;
    out.decoder.mean_b += inv_j * d_mu_x.colwise().sum().transpose();
    out.decoder.scale_w += inv_j * d_pre_scale.transpose() * dec.hidden;
    out.decoder.scale_b += inv_j * d_pre_scale.colwise().sum().transpose();

    const Eigen::MatrixXd d_hidden =
        d_mu_x * decoder.net.mean_w + d_pre_scale * decoder.net.scale_w;
    const Eigen::MatrixXd d_pre_hidden =
        d_hidden.cwiseProduct(relu_mask(dec.pre_hidden));
    out.decoder.hidden_w += inv_j * d_pre_hidden.transpose() * z;
    out.decoder.hidden_b += inv_j * d_pre_hidden.colwise().sum().transpose();

    const Eigen::MatrixXd d_z = d_pre_hidden * decoder.net.hidden_w;
    d_mu_z += inv_j * d_z;
    d_h += inv_j * (d_z.array().rowwise() * v.transpose().array()).matrix();
  }

  out.estimate = {kl_term + recon_term, kl_term, recon_term, mc_samples, seed};
  if (!with_grad) return out;

  const Eigen::MatrixXd d_pre_scale_enc =
      d_h.cwiseProduct(sigmoid_m(enc.pre_scale));
  out.encoder = TwoHeadMlp::zeros(encoder.net.spec());
  out.encoder.mean_w = d_mu_z.transpose() * enc.hidden;
  out.encoder.mean_b = d_mu_z.colwise().sum().transpose();
  out.encoder.scale_w = d_pre_scale_enc.transpose() * enc.hidden;
  out.encoder.scale_b = d_pre_scale_enc.colwise().sum().transpose();
  const Eigen::MatrixXd d_hidden_enc =
      d_mu_z * encoder.net.mean_w + d_pre_scale_enc * encoder.net.scale_w;
  const Eigen::MatrixXd d_pre_hidden_enc =
      d_hidden_enc.cwiseProduct(relu_mask(enc.pre_hidden));
  out.encoder.hidden_w = d_pre_hidden_enc.transpose() * data;
  out.encoder.hidden_b = d_pre_hidden_enc.colwise().sum().transpose();

  if (!out.encoder.all_finite() || !out.decoder.all_finite())
    throw NumericalError("mtvae: non-finite gradient (training fault)");
  return out;
}

TwoHeadMlp axpy(const TwoHeadMlp& base, double eta, const TwoHeadMlp& grad) {
  TwoHeadMlp out = base;
  out.hidden_w += eta * grad.hidden_w;
  out.hidden_b += eta * grad.hidden_b;
  out.mean_w += eta * grad.mean_w;
  out.mean_b += eta * grad.mean_b;
  out.scale_w += eta * grad.scale_w;
  out.scale_b += eta * grad.scale_b;
  return out;
}

json tensor_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Eigen::MatrixXd tensor_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw std::invalid_argument("mtvae checkpoint: tensor size mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = flat[at++];
  return m;
}

json net_json(const TwoHeadMlp& net) {
  return json{{"hidden_w", tensor_json(net.hidden_w)},
              {"hidden_b", tensor_json(net.hidden_b)},
              {"mean_w", tensor_json(net.mean_w)},
              {"mean_b", tensor_json(net.mean_b)},
              {"scale_w", tensor_json(net.scale_w)},
              {"scale_b", tensor_json(net.scale_b)}};
}

TwoHeadMlp net_from_json(const json& j) {
  TwoHeadMlp net;
  net.hidden_w = tensor_from_json(j.at("hidden_w"));
  net.hidden_b = tensor_from_json(j.at("hidden_b"));
  net.mean_w = tensor_from_json(j.at("mean_w"));
  net.mean_b = tensor_from_json(j.at("mean_b"));
  net.scale_w = tensor_from_json(j.at("scale_w"));
  net.scale_b = tensor_from_json(j.at("scale_b"));
  return net;
}

}  // namespace

TwoHeadMlp TwoHeadMlp::zeros(const MlpSpec& spec) {
  TwoHeadMlp net;
  net.hidden_w = Eigen::MatrixXd::Zero(spec.hidden_dim, spec.input_dim);
  net.hidden_b = Eigen::VectorXd::Zero(spec.hidden_dim);
  net.mean_w = Eigen::MatrixXd::Zero(spec.output_dim, spec.hidden_dim);
  net.mean_b = Eigen::VectorXd::Zero(spec.output_dim);
  net.scale_w = Eigen::MatrixXd::Zero(spec.output_dim, spec.hidden_dim);
  net.scale_b = Eigen::VectorXd::Zero(spec.output_dim);
  return net;
}

bool TwoHeadMlp::all_finite() const {
  return hidden_w.allFinite() && hidden_b.allFinite() && mean_w.allFinite() &&
         mean_b.allFinite() && scale_w.allFinite() && scale_b.allFinite();
}

ForwardResult decoder_forward(const DecoderParams& decoder,
                              const Eigen::VectorXd& z) {
  if (z.size() != decoder.net.spec().input_dim)
    throw std::invalid_argument("mtvae: decoder input dimension mismatch");
  const BatchForward f = batch_forward(decoder.net, z.transpose());
  return {f.mean.row(0).transpose(), f.scale.row(0).transpose()};
}

ForwardResult encoder_forward(const EncoderParams& encoder,
                              const Eigen::VectorXd& x) {
  if (x.size() != encoder.net.spec().input_dim)
    throw std::invalid_argument("mtvae: encoder input dimension mismatch");
  const BatchForward f = batch_forward(encoder.net, x.transpose());
  return {f.mean.row(0).transpose(), f.scale.row(0).transpose()};
}

ElboEstimate elbo(const EncoderParams& encoder, const DecoderParams& decoder,
                  const Dataset& data, int mc_samples, std::uint64_t seed) {
  return evaluate(encoder, decoder, data, mc_samples, seed, false).estimate;
}

ElboGradients elbo_grad(const EncoderParams& encoder,
                        const DecoderParams& decoder, const Dataset& data,
                        int mc_samples, std::uint64_t seed) {
  return evaluate(encoder, decoder, data, mc_samples, seed, true);
}

LocalSgdResult local_sgd(const EncoderParams& encoder,
                         const DecoderParams& decoder, const Dataset& data,
                         double eta, int mc_samples, std::uint64_t seed) {
  if (eta < 0.0) throw std::invalid_argument("mtvae: eta must be >= 0");
  const ElboGradients at_start =
      elbo_grad(encoder, decoder, data, mc_samples, seed);
  EncoderParams updated{axpy(encoder.net, eta, at_start.encoder)};
  if (!updated.net.all_finite())
    throw NumericalError("mtvae: non-finite encoder update");
  // Decoder gradient at the updated encoder, same draws.
  ElboGradients at_updated =
      elbo_grad(updated, decoder, data, mc_samples, seed);
  return {std::move(updated), std::move(at_updated.decoder),
          at_updated.estimate};
}

std::vector<DecoderParams> global_step(
    const std::vector<DecoderParams>& decoders,
    const std::vector<TwoHeadMlp>& gradients, double eta,
    consensus::ConsensusSession& session) {
  if (decoders.empty() || decoders.size() != gradients.size())
    throw std::invalid_argument("mtvae: decoder/gradient count mismatch");
  if (static_cast<int>(decoders.size()) != session.participants())
    throw std::invalid_argument("mtvae: participant count mismatch");
  const MlpSpec spec = decoders[0].net.spec();
  const Eigen::Index width = flatten(decoders[0].net).size();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(gradients.size()), width);
  for (std::size_t s = 0; s < gradients.size(); ++s)
    rows.row(static_cast<Eigen::Index>(s)) = flatten(gradients[s]).transpose();

  const Eigen::MatrixXd sums = session.sum_views(rows);
  std::vector<DecoderParams> updated;
  updated.reserve(decoders.size());
  for (std::size_t s = 0; s < decoders.size(); ++s) {
    const TwoHeadMlp total = unflatten(
        spec, sums.row(static_cast<Eigen::Index>(s)).transpose());
    updated.push_back({axpy(decoders[s].net, eta, total)});
  }
  return updated;
}

double anomaly_score_mc(const Eigen::VectorXd& x, const EncoderParams& encoder,
                        const DecoderParams& decoder, int mc_samples,
                        std::uint64_t seed) {
  if (mc_samples < 1)
    throw std::invalid_argument("mtvae: mc_samples must be >= 1");
  const ForwardResult posterior = encoder_forward(encoder, x);
  Rng rng(seed);
  double acc = 0.0;
  for (int j = 0; j < mc_samples; ++j) {
    const Eigen::VectorXd v = rng.gaussian_vector(posterior.mean.size());
    const Eigen::VectorXd z =
        posterior.mean + posterior.scale.cwiseProduct(v);
    const ForwardResult px = decoder_forward(decoder, z);
    acc += log_mvn_diag(x, px.mean, px.scale);
  }
  return -acc / mc_samples;
}

Eigen::VectorXd flatten(const TwoHeadMlp& net) {
  const Eigen::Index total = net.hidden_w.size() + net.hidden_b.size() +
                             net.mean_w.size() + net.mean_b.size() +
                             net.scale_w.size() + net.scale_b.size();
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  const auto put = [&](const Eigen::MatrixXd& m) {
    flat.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += m.size();
  };
  put(net.hidden_w);
  put(net.hidden_b);
  put(net.mean_w);
  put(net.mean_b);
  put(net.scale_w);
  put(net.scale_b);
  return flat;
}

TwoHeadMlp unflatten(const MlpSpec& spec, const Eigen::VectorXd& flat) {
  TwoHeadMlp net = TwoHeadMlp::zeros(spec);
  Eigen::Index at = 0;
  const auto take = [&](Eigen::MatrixXd& m) {
    m = Eigen::Map<const Eigen::MatrixXd>(flat.data() + at, m.rows(), m.cols());
    at += m.size();
  };
  const auto take_v = [&](Eigen::VectorXd& v) {
    v = flat.segment(at, v.size());
    at += v.size();
  };
  take(net.hidden_w);
  take_v(net.hidden_b);
  take(net.mean_w);
  take_v(net.mean_b);
  take(net.scale_w);
  take_v(net.scale_b);
  if (at != flat.size())
    throw std::invalid_argument("mtvae: flat parameter size mismatch");
  return net;
}

namespace {

TwoHeadMlp random_net(const MlpSpec& spec, Rng& rng) {
  TwoHeadMlp net = TwoHeadMlp::zeros(spec);
  const double hidden_scale = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(spec.hidden_dim));
  net.hidden_w = hidden_scale * rng.gaussian_matrix(spec.hidden_dim, spec.input_dim);
  net.mean_w = head_scale * rng.gaussian_matrix(spec.output_dim, spec.hidden_dim);
  net.scale_b.setConstant(std::log(std::exp(1.0) - 1.0));  // softplus -> 1
  return net;
}

}  // namespace

DecoderParams init_decoder(const MlpSpec& spec, Rng& rng) {
  return {random_net(spec, rng)};
}

EncoderParams init_encoder(const MlpSpec& spec, Rng& rng) {
  return {random_net(spec, rng)};
}

FitResult fit(const std::vector<Dataset>& datasets,
              const topology::Graph* graph, const FitOptions& options) {
  const int participants = static_cast<int>(datasets.size());
  if (participants == 0) throw std::invalid_argument("mtvae fit: no datasets");
  for (const Dataset& d : datasets)
    if (d.rows() == 0 || d.cols() != datasets[0].cols())
      throw std::invalid_argument("mtvae fit: malformed datasets");
  if (options.epochs < 0)
    throw std::invalid_argument("mtvae fit: epochs must be >= 0");

  const bool exact = options.exact_aggregation || participants == 1;
  consensus::ConsensusSession session =
      exact ? consensus::ConsensusSession::exact(participants)
            : [&] {
                if (!graph || graph->size() != participants)
                  throw std::invalid_argument(
                      "mtvae fit: graph/participant mismatch");
                const topology::WeightMatrix w =
                    topology::consensus_weights(*graph);
                if (!topology::spectral_gap(w).contraction_ok)
                  throw std::invalid_argument(
                      "mtvae fit: consensus weights cannot contract");
                return consensus::ConsensusSession::network(w,
                                                            options.consensus);
              }();

  const Eigen::Index m = datasets[0].cols();
  Rng init_rng(mix_seed(options.seed, 0));
  const MlpSpec decoder_spec{options.latent_dim, options.hidden_dim, m};
  const MlpSpec encoder_spec{m, options.hidden_dim, options.latent_dim};
  const DecoderParams shared_init = init_decoder(decoder_spec, init_rng);
  std::vector<DecoderParams> decoders(participants, shared_init);
  std::vector<EncoderParams> encoders;
  encoders.reserve(participants);
  for (int s = 0; s < participants; ++s)
    encoders.push_back(init_encoder(encoder_spec, init_rng));

  FitResult result;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<TwoHeadMlp> gradients(participants);
    EpochStats stats;
    stats.epoch = epoch;
    stats.objectives.resize(participants);
    stats.kl_terms.resize(participants);
    stats.collapse_flag = false;
    for (int s = 0; s < participants; ++s) {
      Dataset batch = datasets[s];
      if (options.minibatch > 0 && options.minibatch < batch.rows()) {
        Rng shuffle_rng(mix_seed(options.seed,
                                 0xB0000000ULL + 1ULL * epoch * participants + s));
        const std::vector<int> order =
            shuffle_rng.permutation(static_cast<int>(batch.rows()));
        Dataset subset(options.minibatch, batch.cols());
        for (int i = 0; i < options.minibatch; ++i)
          subset.row(i) = batch.row(order[i]);
        batch = std::move(subset);
      }
      const std::uint64_t step_seed =
          mix_seed(options.seed, 1ULL + 1ULL * epoch * participants + s);
      LocalSgdResult local = local_sgd(encoders[s], decoders[s], batch,
                                       options.eta, options.mc_samples,
                                       step_seed);
      encoders[s] = std::move(local.encoder);
      gradients[s] = std::move(local.decoder_grad);
      stats.objectives[s] = local.estimate.value;
      stats.kl_terms[s] = local.estimate.kl_term;
      const double mean_kl = -local.estimate.kl_term / batch.rows();
      if (mean_kl < options.collapse_threshold) stats.collapse_flag = true;
    }
    if (!stats.objectives.allFinite()) {
      result.history.push_back(stats);
      throw DivergenceError("mtvae fit: objective diverged",
                            std::move(result.history));
    }
    decoders = global_step(decoders, gradients, options.eta, session);
    result.consensus_iterations.push_back(session.last_iterations());
    result.history.push_back(std::move(stats));
  }

  for (int s = 1; s < participants; ++s)
    result.max_view_divergence =
        std::max(result.max_view_divergence,
                 (flatten(decoders[s].net) - flatten(decoders[0].net))
                     .cwiseAbs()
                     .maxCoeff());

  result.decoder = decoders[0];
  result.participant_decoders = std::move(decoders);
  result.encoders = std::move(encoders);
  result.collapse_warning =
      !result.history.empty() && result.history.back().collapse_flag;
  return result;
}

void write_training_log(const std::vector<EpochStats>& history,
                        std::ostream& out) {
  out << "epoch,participant,objective,kl_term\n";
  for (const EpochStats& stats : history)
    for (Eigen::Index s = 0; s < stats.objectives.size(); ++s)
      out << stats.epoch << ',' << s << ',' << stats.objectives[s] << ','
          << stats.kl_terms[s] << '\n';
}

void save_checkpoint(const FitResult& result, std::ostream& out) {
  const MlpSpec spec = result.decoder.net.spec();
  json j;
  j["model"] = "mtvae";
  j["dims"] = {{"latent", spec.input_dim},
               {"hidden", spec.hidden_dim},
               {"observed", spec.output_dim}};
  j["decoder"] = net_json(result.decoder.net);
  json encoders = json::array();
  for (const EncoderParams& encoder : result.encoders)
    encoders.push_back(net_json(encoder.net));
  j["encoders"] = std::move(encoders);
  j["epochs"] = result.history.size();
  json history = json::array();
  for (const EpochStats& stats : result.history)
    history.push_back(stats.objectives.sum());
  j["objective_history"] = std::move(history);
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(std::istream& in) {
  json j;
  in >> j;
  if (j.value("model", "") != "mtvae")
    throw std::invalid_argument("mtvae checkpoint: wrong model tag");
  Checkpoint checkpoint;
  checkpoint.decoder.net = net_from_json(j.at("decoder"));
  for (const json& e : j.at("encoders"))
    checkpoint.encoders.push_back({net_from_json(e)});
  checkpoint.epochs = j.at("epochs").get<int>();
  checkpoint.objective_history =
      j.at("objective_history").get<std::vector<double>>();
  return checkpoint;
}

}  // namespace collabdict::mtvae
