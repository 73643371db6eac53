#pragma once

#include "collabdict/ggm.hpp"
#include "collabdict/mtvae.hpp"
#include "collabdict/privacy.hpp"
#include "collabdict/topology.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace collabdict::harness {

/// Planted mixture description for synthetic multi-task datasets.
struct SyntheticSpec {
  int participants = 3;
  Eigen::Index dim = 2;
  int pattern_count = 2;
  std::vector<int> sample_counts;          // one per participant
  std::vector<Eigen::VectorXd> means;      // planted centers
  std::vector<Eigen::MatrixXd> covariances;
  Eigen::MatrixXd mixing;  // participants x patterns; empty = seeded random
  double anomaly_rate = 0.0;
  double anomaly_shift = 0.0;  // absolute displacement along a random direction
  std::uint64_t seed = 0;
};

struct SyntheticData {
  std::vector<ggm::Dataset> datasets;
  std::vector<std::vector<int>> labels;  // 1 marks an injected anomaly
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);

struct GraphConfig {
  std::string kind = "complete";  // complete | inverse-chord | file
  int size = 3;
  std::string path;  // for kind == file
};

struct ConsensusConfig {
  std::string mode = "network";  // network | exact
  double tol = 1e-9;
  int max_iter = 20000;
  int chunks = 1;
};

struct GgmConfig {
  int patterns = 2;
  double lambda0 = 1.0;
  double rho = 0.1;
  double delta = 1.0;
  int max_rounds = 200;
  double tol = 1e-5;
};

struct MtvaeConfig {
  Eigen::Index latent_dim = 2;
  Eigen::Index hidden_dim = 16;
  double eta = 1e-3;
  int mc_samples = 8;
  int epochs = 100;
  int minibatch = 0;
  int score_mc_samples = 64;
};

struct PrivacyConfig {
  double ell0 = 2.0;
  int audit_trials = 100;
};

struct DataConfig {
  bool use_synthetic = true;
  SyntheticSpec synthetic;
  std::string dir;  // expects data_<s>.csv and optional labels_<s>.csv
};

struct ExperimentConfig {
  std::string model = "ggm";  // ggm | mtvae
  std::uint64_t seed = 0;
  GraphConfig graph;
  ConsensusConfig consensus;
  DataConfig data;
  GgmConfig ggm;
  MtvaeConfig mtvae;
  PrivacyConfig privacy;
  double holdout_fraction = 0.2;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

struct ScoreRow {
  int participant;
  int index;  // position within the participant's held-out set
  double score;
  int label;
};

struct RunReport {
  nlohmann::json config_echo;  // fully resolved configuration
  std::string model;
  std::vector<double> objective_history;
  std::vector<int> consensus_iterations;
  std::vector<ScoreRow> scores;
  double auc = 0.0;
  nlohmann::json privacy;  // null for the mtvae path
  bool collapse_warning = false;
  std::map<std::string, double> timings;
  double total_seconds = 0.0;

  nlohmann::json to_json(bool include_timings = true) const;
};

struct ExperimentOutput {
  RunReport report;
  std::optional<ggm::FitResult> ggm_result;
  std::optional<mtvae::FitResult> mtvae_result;
};

/// Builds the graph, generates or loads the data, fits the configured model
/// over CollabDict, scores the held-out split, and (GGM) runs the privacy
/// audits. Failures carry a `[stage]` prefix naming the stage that threw.
ExperimentOutput run_experiment(const ExperimentConfig& config);

/// report.json plus scores.csv under the given directory.
void export_report(const RunReport& report, const std::filesystem::path& dir);

/// Rank-based AUC with midrank tie handling; 0.5 when a class is absent.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

nlohmann::json privacy_report_json(const privacy::PrivacyReport& report);

}  // namespace collabdict::harness
