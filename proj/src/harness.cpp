#include "collabdict/harness.hpp"

#include "collabdict/common.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace collabdict::harness {

namespace {

using nlohmann::json;

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(
      values.data(), static_cast<Eigen::Index>(values.size()));
}

template <typename F>
auto timed_stage(const std::string& name,
                 std::map<std::string, double>& timings, F&& fn) {
  const auto start = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings[name] +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();
    } else {
      auto value = fn();
      timings[name] +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();
      return value;
    }
  } catch (const std::exception& error) {
    throw std::runtime_error("[" + name + "] " + error.what());
  }
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.participants < 1)
    throw std::invalid_argument("synthetic: participants must be >= 1");
  if (spec.dim < 1) throw std::invalid_argument("synthetic: dim must be >= 1");
  if (spec.pattern_count < 1)
    throw std::invalid_argument("synthetic: patterns must be >= 1");
  if (static_cast<int>(spec.sample_counts.size()) != spec.participants)
    throw std::invalid_argument("synthetic: one sample count per participant");
  for (int n : spec.sample_counts)
    if (n < 1) throw std::invalid_argument("synthetic: counts must be >= 1");
  if (static_cast<int>(spec.means.size()) != spec.pattern_count ||
      static_cast<int>(spec.covariances.size()) != spec.pattern_count)
    throw std::invalid_argument("synthetic: one mean/covariance per pattern");
  for (const Eigen::VectorXd& mean : spec.means)
    if (mean.size() != spec.dim)
      throw std::invalid_argument("synthetic: mean dimension mismatch");
  if (!(spec.anomaly_rate >= 0.0 && spec.anomaly_rate < 1.0))
    throw std::invalid_argument("synthetic: anomaly_rate must be in [0, 1)");
  if (spec.mixing.size() != 0 &&
      (spec.mixing.rows() != spec.participants ||
       spec.mixing.cols() != spec.pattern_count))
    throw std::invalid_argument("synthetic: mixing must be S x K");
}

std::vector<ggm::Dataset> load_directory(const std::filesystem::path& dir,
                                         std::vector<std::vector<int>>* labels) {
  std::vector<ggm::Dataset> datasets;
  for (int s = 0;; ++s) {
    const std::filesystem::path file = dir / ("data_" + std::to_string(s) + ".csv");
    if (!std::filesystem::exists(file)) break;
    std::ifstream in(file);
    datasets.push_back(ggm::load_csv(in));
    std::vector<int> participant_labels(datasets.back().rows(), 0);
    const std::filesystem::path label_file =
        dir / ("labels_" + std::to_string(s) + ".csv");
    if (std::filesystem::exists(label_file)) {
      std::ifstream label_in(label_file);
      const ggm::Dataset raw = ggm::load_csv(label_in);
      if (raw.rows() != datasets.back().rows())
        throw std::invalid_argument("labels_" + std::to_string(s) +
                                    ".csv row count mismatch");
      for (Eigen::Index i = 0; i < raw.rows(); ++i)
        participant_labels[i] = raw(i, 0) != 0.0 ? 1 : 0;
    }
    labels->push_back(std::move(participant_labels));
  }
  if (datasets.empty())
    throw std::invalid_argument("no data_<s>.csv files under " + dir.string());
  return datasets;
}

struct Split {
  std::vector<ggm::Dataset> train;
  std::vector<ggm::Dataset> test;
  std::vector<std::vector<int>> test_labels;
};

Split stratified_split(const SyntheticData& data, double fraction,
                       std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("holdout fraction must be in [0, 1)");
  Split split;
  for (std::size_t s = 0; s < data.datasets.size(); ++s) {
    const ggm::Dataset& d = data.datasets[s];
    Rng rng(mix_seed(seed, 0x5511ULL + s));
    std::vector<int> by_label[2];
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      by_label[data.labels[s][i]].push_back(static_cast<int>(i));

    std::vector<int> test_idx;
    for (std::vector<int>& bucket : by_label) {
      for (int i = static_cast<int>(bucket.size()) - 1; i > 0; --i)
        std::swap(bucket[i], bucket[rng.uniform_int(i + 1)]);
      const int take = static_cast<int>(fraction * bucket.size());
      test_idx.insert(test_idx.end(), bucket.begin(), bucket.begin() + take);
    }
    std::sort(test_idx.begin(), test_idx.end());

    std::vector<char> is_test(d.rows(), 0);
    for (int i : test_idx) is_test[i] = 1;
    ggm::Dataset train(d.rows() - test_idx.size(), d.cols());
    ggm::Dataset test(test_idx.size(), d.cols());
    std::vector<int> test_labels;
    Eigen::Index train_at = 0;
    Eigen::Index test_at = 0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      if (is_test[i]) {
        test.row(test_at++) = d.row(i);
        test_labels.push_back(data.labels[s][i]);
      } else {
        train.row(train_at++) = d.row(i);
      }
    }
    if (train.rows() == 0)
      throw std::invalid_argument("holdout fraction left no training data");
    split.train.push_back(std::move(train));
    split.test.push_back(std::move(test));
    split.test_labels.push_back(std::move(test_labels));
  }
  return split;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);

  Eigen::MatrixXd mixing = spec.mixing;
  if (mixing.size() == 0) {
    mixing.resize(spec.participants, spec.pattern_count);
    for (int s = 0; s < spec.participants; ++s) {
      for (int k = 0; k < spec.pattern_count; ++k)
        mixing(s, k) = 0.2 + rng.uniform();
      mixing.row(s) /= mixing.row(s).sum();
    }
  }

  std::vector<Eigen::MatrixXd> chol;
  for (const Eigen::MatrixXd& cov : spec.covariances) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("synthetic: covariance not positive definite");
    chol.push_back(llt.matrixL());
  }

  SyntheticData data;
  for (int s = 0; s < spec.participants; ++s) {
    const int n = spec.sample_counts[s];
    ggm::Dataset dataset(n, spec.dim);
    std::vector<int> labels(n, 0);
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      int pattern = 0;
      double cumulative = 0.0;
      for (int k = 0; k < spec.pattern_count; ++k) {
        cumulative += mixing(s, k);
        if (u < cumulative) {
          pattern = k;
          break;
        }
        pattern = k;
      }
      Eigen::VectorXd x =
          spec.means[pattern] + chol[pattern] * rng.gaussian_vector(spec.dim);
      if (spec.anomaly_rate > 0.0 && rng.uniform() < spec.anomaly_rate) {
        Eigen::VectorXd direction = rng.gaussian_vector(spec.dim);
        direction.normalize();
        x += spec.anomaly_shift * direction;
        labels[i] = 1;
      }
      dataset.row(i) = x.transpose();
    }
    data.datasets.push_back(std::move(dataset));
    data.labels.push_back(std::move(labels));
  }
  return data;
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  SyntheticSpec spec;
  spec.participants = j.value("participants", spec.participants);
  spec.dim = j.value("dim", spec.dim);
  spec.pattern_count = j.value("patterns", spec.pattern_count);
  if (j.contains("sample_counts")) {
    spec.sample_counts = j.at("sample_counts").get<std::vector<int>>();
  } else {
    spec.sample_counts.assign(spec.participants,
                              j.value("samples_per_participant", 100));
  }
  if (j.contains("means"))
    for (const json& mean : j.at("means")) spec.means.push_back(vector_from(mean));
  if (j.contains("covariances")) {
    for (const json& cov : j.at("covariances")) {
      const auto flat = cov.get<std::vector<double>>();
      if (static_cast<Eigen::Index>(flat.size()) != spec.dim * spec.dim)
        throw std::invalid_argument("synthetic: covariance must be dim x dim");
      Eigen::MatrixXd m(spec.dim, spec.dim);
      Eigen::Index at = 0;
      for (Eigen::Index r = 0; r < spec.dim; ++r)
        for (Eigen::Index c = 0; c < spec.dim; ++c) m(r, c) = flat[at++];
      spec.covariances.push_back(std::move(m));
    }
  } else {
    const double scale = j.value("covariance_scale", 1.0);
    spec.covariances.assign(
        spec.pattern_count,
        scale * Eigen::MatrixXd::Identity(spec.dim, spec.dim));
  }
  if (j.contains("mixing")) {
    const auto rows = j.at("mixing").get<std::vector<std::vector<double>>>();
    spec.mixing.resize(static_cast<Eigen::Index>(rows.size()),
                       spec.pattern_count);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (int c = 0; c < spec.pattern_count; ++c)
        spec.mixing(static_cast<Eigen::Index>(r), c) = rows[r][c];
  }
  spec.anomaly_rate = j.value("anomaly_rate", spec.anomaly_rate);
  spec.anomaly_shift = j.value("anomaly_shift", spec.anomaly_shift);
  spec.seed = j.value("seed", spec.seed);
  return spec;
}

json synthetic_spec_to_json(const SyntheticSpec& spec) {
  json j;
  j["participants"] = spec.participants;
  j["dim"] = spec.dim;
  j["patterns"] = spec.pattern_count;
  j["sample_counts"] = spec.sample_counts;
  json means = json::array();
  for (const Eigen::VectorXd& mean : spec.means) means.push_back(vector_json(mean));
  j["means"] = std::move(means);
  json covs = json::array();
  for (const Eigen::MatrixXd& cov : spec.covariances) {
    std::vector<double> flat;
    for (Eigen::Index r = 0; r < cov.rows(); ++r)
      for (Eigen::Index c = 0; c < cov.cols(); ++c) flat.push_back(cov(r, c));
    covs.push_back(flat);
  }
  j["covariances"] = std::move(covs);
  if (spec.mixing.size() != 0) {
    json mixing = json::array();
    for (Eigen::Index r = 0; r < spec.mixing.rows(); ++r)
      mixing.push_back(vector_json(spec.mixing.row(r).transpose()));
    j["mixing"] = std::move(mixing);
  }
  j["anomaly_rate"] = spec.anomaly_rate;
  j["anomaly_shift"] = spec.anomaly_shift;
  j["seed"] = spec.seed;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig config;
  config.model = j.value("model", config.model);
  if (config.model != "ggm" && config.model != "mtvae")
    throw std::invalid_argument("config: model must be ggm or mtvae");
  config.seed = j.value("seed", config.seed);
  if (j.contains("graph")) {
    const json& g = j.at("graph");
    config.graph.kind = g.value("kind", config.graph.kind);
    config.graph.size = g.value("size", config.graph.size);
    config.graph.path = g.value("path", config.graph.path);
  }
  if (j.contains("consensus")) {
    const json& c = j.at("consensus");
    config.consensus.mode = c.value("mode", config.consensus.mode);
    config.consensus.tol = c.value("tol", config.consensus.tol);
    config.consensus.max_iter = c.value("max_iter", config.consensus.max_iter);
    config.consensus.chunks = c.value("chunks", config.consensus.chunks);
    if (config.consensus.mode != "network" && config.consensus.mode != "exact")
      throw std::invalid_argument("config: consensus.mode must be network or exact");
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    if (d.contains("dir")) {
      config.data.use_synthetic = false;
      config.data.dir = d.at("dir").get<std::string>();
    } else if (d.contains("synthetic")) {
      config.data.use_synthetic = true;
      config.data.synthetic = synthetic_spec_from_json(d.at("synthetic"));
      if (!d.at("synthetic").contains("seed"))
        config.data.synthetic.seed = mix_seed(config.seed, 0xDA7AULL);
    }
  }
  if (j.contains("ggm")) {
    const json& g = j.at("ggm");
    config.ggm.patterns = g.value("patterns", config.ggm.patterns);
    config.ggm.lambda0 = g.value("lambda0", config.ggm.lambda0);
    config.ggm.rho = g.value("rho", config.ggm.rho);
    config.ggm.delta = g.value("delta", config.ggm.delta);
    config.ggm.max_rounds = g.value("max_rounds", config.ggm.max_rounds);
    config.ggm.tol = g.value("tol", config.ggm.tol);
  }
  if (j.contains("mtvae")) {
    const json& m = j.at("mtvae");
    config.mtvae.latent_dim = m.value("latent_dim", config.mtvae.latent_dim);
    config.mtvae.hidden_dim = m.value("hidden_dim", config.mtvae.hidden_dim);
    config.mtvae.eta = m.value("eta", config.mtvae.eta);
    config.mtvae.mc_samples = m.value("mc_samples", config.mtvae.mc_samples);
    config.mtvae.epochs = m.value("epochs", config.mtvae.epochs);
    config.mtvae.minibatch = m.value("minibatch", config.mtvae.minibatch);
    config.mtvae.score_mc_samples =
        m.value("score_mc_samples", config.mtvae.score_mc_samples);
  }
  if (j.contains("privacy")) {
    const json& p = j.at("privacy");
    config.privacy.ell0 = p.value("ell0", config.privacy.ell0);
    config.privacy.audit_trials =
        p.value("audit_trials", config.privacy.audit_trials);
  }
  config.holdout_fraction = j.value("holdout_fraction", config.holdout_fraction);
  return config;
}

json config_to_json(const ExperimentConfig& config) {
  json j;
  j["model"] = config.model;
  j["seed"] = config.seed;
  j["graph"] = {{"kind", config.graph.kind},
                {"size", config.graph.size},
                {"path", config.graph.path}};
  j["consensus"] = {{"mode", config.consensus.mode},
                    {"tol", config.consensus.tol},
                    {"max_iter", config.consensus.max_iter},
                    {"chunks", config.consensus.chunks}};
  if (config.data.use_synthetic)
    j["data"] = {{"synthetic", synthetic_spec_to_json(config.data.synthetic)}};
  else
    j["data"] = {{"dir", config.data.dir}};
  j["ggm"] = {{"patterns", config.ggm.patterns},
              {"lambda0", config.ggm.lambda0},
              {"rho", config.ggm.rho},
              {"delta", config.ggm.delta},
              {"max_rounds", config.ggm.max_rounds},
              {"tol", config.ggm.tol}};
  j["mtvae"] = {{"latent_dim", config.mtvae.latent_dim},
                {"hidden_dim", config.mtvae.hidden_dim},
                {"eta", config.mtvae.eta},
                {"mc_samples", config.mtvae.mc_samples},
                {"epochs", config.mtvae.epochs},
                {"minibatch", config.mtvae.minibatch},
                {"score_mc_samples", config.mtvae.score_mc_samples}};
  j["privacy"] = {{"ell0", config.privacy.ell0},
                  {"audit_trials", config.privacy.audit_trials}};
  j["holdout_fraction"] = config.holdout_fraction;
  return j;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: score/label size mismatch");
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (int label : labels) positives += label == 1;
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return 0.5;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) +
                                  static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) positive_rank_sum += midrank;
    i = j + 1;
  }
  const double u = positive_rank_sum -
                   0.5 * static_cast<double>(positives) *
                       static_cast<double>(positives + 1);
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

json privacy_report_json(const privacy::PrivacyReport& report) {
  json j;
  j["epsilon"] = report.budget.epsilon;
  j["inputs"] = {{"patterns", report.budget.pattern_count},
                 {"norm_bound", report.budget.norm_bound},
                 {"radius", report.budget.radius},
                 {"lambda0", report.budget.lambda0},
                 {"delta", report.delta}};
  json components = json::array();
  for (const privacy::ComponentBound& component : report.components)
    components.push_back({{"norm", component.norm},
                          {"bound", component.bound},
                          {"g_at_bound", component.g_at_bound}});
  j["components"] = std::move(components);
  json diversity = json::array();
  for (const privacy::DiversityReport& d : report.diversity)
    diversity.push_back({{"entropies", vector_json(d.entropies)},
                         {"max_entropy", d.max_entropy},
                         {"threshold", d.threshold},
                         {"pass", d.pass}});
  j["diversity"] = std::move(diversity);
  j["audit"] = {{"trials", report.audit.trials},
                {"violations", report.audit.violations},
                {"max_kl", report.audit.max_kl},
                {"epsilon", report.audit.epsilon}};
  j["noise_recommended"] = report.noise_recommended;
  return j;
}

json RunReport::to_json(bool include_timings) const {
  json j;
  j["model"] = model;
  j["config"] = config_echo;
  j["objective_history"] = objective_history;
  j["consensus_iterations"] = consensus_iterations;
  j["auc"] = auc;
  j["privacy"] = privacy;
  j["collapse_warning"] = collapse_warning;
  json score_rows = json::array();
  for (const ScoreRow& row : scores)
    score_rows.push_back({{"participant", row.participant},
                          {"index", row.index},
                          {"score", row.score},
                          {"label", row.label}});
  j["scores"] = std::move(score_rows);
  if (include_timings) {
    j["timings"] = timings;
    j["total_seconds"] = total_seconds;
  }
  return j;
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  ExperimentOutput output;
  RunReport& report = output.report;
  report.model = config.model;
  report.config_echo = config_to_json(config);
  report.privacy = nullptr;

  const bool exact = config.consensus.mode == "exact";
  std::optional<topology::Graph> graph;
  timed_stage("graph", report.timings, [&] {
    if (exact) return;
    if (config.graph.kind == "complete") {
      graph = topology::build_complete(config.graph.size);
    } else if (config.graph.kind == "inverse-chord") {
      graph = topology::build_cycle_inverse_chord(config.graph.size);
    } else if (config.graph.kind == "file") {
      std::ifstream in(config.graph.path);
      if (!in) throw std::invalid_argument("cannot open " + config.graph.path);
      graph = topology::load_edge_list(in);
    } else {
      throw std::invalid_argument("unknown graph kind " + config.graph.kind);
    }
  });

  SyntheticData data = timed_stage("data", report.timings, [&] {
    SyntheticData loaded;
    if (config.data.use_synthetic) {
      loaded = generate_synthetic(config.data.synthetic);
    } else {
      loaded.datasets = load_directory(config.data.dir, &loaded.labels);
    }
    if (!exact &&
        graph->size() != static_cast<int>(loaded.datasets.size()))
      throw std::invalid_argument(
          "graph size does not match the participant count");
    return loaded;
  });

  Split split = timed_stage("split", report.timings, [&] {
    return stratified_split(data, config.holdout_fraction,
                            mix_seed(config.seed, 0x477ULL));
  });

  consensus::ConsensusSession::Options consensus_options;
  consensus_options.tol = config.consensus.tol;
  consensus_options.max_iter = config.consensus.max_iter;
  consensus_options.chunks = config.consensus.chunks;
  consensus_options.seed = mix_seed(config.seed, 0xC0ULL);

  if (config.model == "ggm") {
    const ggm::FitResult& fitted =
        *timed_stage("fit", report.timings, [&] {
          ggm::FitOptions options;
          options.pattern_count = config.ggm.patterns;
          options.hyper.lambda0 = config.ggm.lambda0;
          options.hyper.rho = config.ggm.rho;
          options.hyper.delta = config.ggm.delta;
          options.max_rounds = config.ggm.max_rounds;
          options.param_tol = config.ggm.tol;
          options.seed = mix_seed(config.seed, 0xF17ULL);
          options.consensus = consensus_options;
          options.exact_aggregation = exact;
          output.ggm_result =
              ggm::fit(split.train, graph ? &*graph : nullptr, options);
          return &*output.ggm_result;
        });
    report.objective_history = fitted.objective;
    report.consensus_iterations = fitted.consensus_iterations;

    timed_stage("score", report.timings, [&] {
      for (std::size_t s = 0; s < split.test.size(); ++s)
        for (Eigen::Index i = 0; i < split.test[s].rows(); ++i)
          report.scores.push_back(
              {static_cast<int>(s), static_cast<int>(i),
               ggm::anomaly_score(split.test[s].row(i).transpose(),
                                  fitted.locals[s].mixture_weights,
                                  fitted.global),
               split.test_labels[s][i]});
    });

    timed_stage("privacy", report.timings, [&] {
      privacy::PrivacyOptions options;
      options.ell0 = config.privacy.ell0;
      options.audit_trials = config.privacy.audit_trials;
      options.seed = mix_seed(config.seed, 0xAEDULL);
      report.privacy = privacy_report_json(privacy::privacy_report(
          fitted.global, fitted.aggregates, split.train, fitted.locals,
          options));
    });
  } else {
    const mtvae::FitResult& fitted =
        *timed_stage("fit", report.timings, [&] {
          mtvae::FitOptions options;
          options.latent_dim = config.mtvae.latent_dim;
          options.hidden_dim = config.mtvae.hidden_dim;
          options.eta = config.mtvae.eta;
          options.mc_samples = config.mtvae.mc_samples;
          options.epochs = config.mtvae.epochs;
          options.minibatch = config.mtvae.minibatch;
          options.seed = mix_seed(config.seed, 0xF17ULL);
          options.consensus = consensus_options;
          options.exact_aggregation = exact;
          output.mtvae_result =
              mtvae::fit(split.train, graph ? &*graph : nullptr, options);
          return &*output.mtvae_result;
        });
    for (const mtvae::EpochStats& stats : fitted.history)
      report.objective_history.push_back(stats.objectives.sum());
    report.consensus_iterations = fitted.consensus_iterations;
    report.collapse_warning = fitted.collapse_warning;

    timed_stage("score", report.timings, [&] {
      for (std::size_t s = 0; s < split.test.size(); ++s)
        for (Eigen::Index i = 0; i < split.test[s].rows(); ++i)
          report.scores.push_back(
              {static_cast<int>(s), static_cast<int>(i),
               mtvae::anomaly_score_mc(
                   split.test[s].row(i).transpose(), fitted.encoders[s],
                   fitted.decoder, config.mtvae.score_mc_samples,
                   mix_seed(config.seed, 0x5C07EULL + 100003ULL * s + i)),
               split.test_labels[s][i]});
    });
  }

  timed_stage("report", report.timings, [&] {
    std::vector<double> flat_scores;
    std::vector<int> flat_labels;
    for (const ScoreRow& row : report.scores) {
      flat_scores.push_back(row.score);
      flat_labels.push_back(row.label);
    }
    report.auc = auc(flat_scores, flat_labels);
  });

  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return output;
}

void export_report(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw std::runtime_error("cannot write report.json");
    out << report.to_json(true).dump(2) << '\n';
  }
  std::ofstream out(dir / "scores.csv");
  if (!out) throw std::runtime_error("cannot write scores.csv");
  out << "participant,index,score,label\n";
  out.precision(17);
  for (const ScoreRow& row : report.scores)
    out << row.participant << ',' << row.index << ',' << row.score << ','
        << row.label << '\n';
}

}  // namespace collabdict::harness
