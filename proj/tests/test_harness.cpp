#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "collabdict/common.hpp"
#include "collabdict/harness.hpp"

#include "support/oracles.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace collabdict;
using namespace collabdict::harness;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.participants = 3;
  spec.dim = 2;
  spec.pattern_count = 2;
  spec.sample_counts = {50, 50, 50};
  spec.means = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, 4.0)};
  spec.covariances = {0.25 * Eigen::MatrixXd::Identity(2, 2),
                      0.25 * Eigen::MatrixXd::Identity(2, 2)};
  spec.anomaly_rate = 0.1;
  spec.anomaly_shift = 3.0;
  spec.seed = 11;
  return spec;
}

nlohmann::json smoke_config_json(const std::string& model) {
  nlohmann::json j;
  j["model"] = model;
  j["seed"] = 7;
  j["graph"] = {{"kind", "complete"}, {"size", 3}};
  j["consensus"] = {{"mode", "network"}, {"tol", 1e-9},
                    {"max_iter", 100000}, {"chunks", 2}};
  j["data"]["synthetic"] = {{"participants", 3},
                            {"dim", 2},
                            {"patterns", 2},
                            {"samples_per_participant", 50},
                            {"means", {{0.0, 0.0}, {4.0, 4.0}}},
                            {"covariance_scale", 0.25},
                            {"anomaly_rate", 0.1},
                            {"anomaly_shift", 3.0},
                            {"seed", 3}};
  j["ggm"] = {{"patterns", 2}, {"rho", 0.1}, {"max_rounds", 30}};
  j["mtvae"] = {{"latent_dim", 2}, {"hidden_dim", 8}, {"eta", 2e-5},
                {"mc_samples", 4}, {"epochs", 15}, {"score_mc_samples", 16}};
  j["privacy"] = {{"ell0", 2.0}, {"audit_trials", 25}};
  return j;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("generate_synthetic: identical seeds give identical datasets") {
  const SyntheticSpec spec = small_spec();
  const SyntheticData a = generate_synthetic(spec);
  const SyntheticData b = generate_synthetic(spec);
  for (int s = 0; s < spec.participants; ++s) {
    CHECK((a.datasets[s] - b.datasets[s]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.labels[s] == b.labels[s]);
  }
  SyntheticSpec other = spec;
  other.seed += 1;
  const SyntheticData c = generate_synthetic(other);
  CHECK((a.datasets[0] - c.datasets[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("generate_synthetic: zero anomaly rate labels everything normal") {
  SyntheticSpec spec = small_spec();
  spec.anomaly_rate = 0.0;
  const SyntheticData data = generate_synthetic(spec);
  for (const std::vector<int>& labels : data.labels)
    for (int label : labels) CHECK(label == 0);
}

TEST_CASE("generate_synthetic: cluster proportions respect the mixing") {
  SyntheticSpec spec = small_spec();
  spec.participants = 2;
  spec.sample_counts = {1000, 1000};
  spec.anomaly_rate = 0.0;
  spec.mixing.resize(2, 2);
  spec.mixing << 0.3, 0.7, 0.8, 0.2;
  spec.seed = 99;
  const SyntheticData data = generate_synthetic(spec);

  // Patterns sit 4 apart at sigma 0.5: nearest-center assignment is exact.
  for (int s = 0; s < 2; ++s) {
    int first = 0;
    for (Eigen::Index i = 0; i < data.datasets[s].rows(); ++i) {
      const Eigen::VectorXd x = data.datasets[s].row(i).transpose();
      if ((x - spec.means[0]).norm() < (x - spec.means[1]).norm()) ++first;
    }
    const double expected = spec.mixing(s, 0) * 1000.0;
    const double sigma3 =
        3.0 * std::sqrt(1000.0 * spec.mixing(s, 0) * (1.0 - spec.mixing(s, 0)));
    CHECK(std::abs(first - expected) <= sigma3);
  }
}

TEST_CASE("synthetic spec json round trip") {
  const SyntheticSpec spec = small_spec();
  const SyntheticSpec loaded =
      synthetic_spec_from_json(synthetic_spec_to_json(spec));
  CHECK(loaded.participants == spec.participants);
  CHECK(loaded.sample_counts == spec.sample_counts);
  CHECK((loaded.means[1] - spec.means[1]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.anomaly_shift == spec.anomaly_shift);
  CHECK(loaded.seed == spec.seed);
}

TEST_CASE("auc: hand cases and oracle agreement") {
  CHECK(auc({1.0, 2.0, 3.0, 4.0}, {0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(auc({4.0, 3.0, 2.0, 1.0}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(auc({1.0, 2.0, 3.0, 4.0}, {1, 1, 0, 0}) == doctest::Approx(0.0));
  CHECK(auc({1.0, 1.0, 1.0, 1.0}, {0, 1, 0, 1}) == doctest::Approx(0.5));
  CHECK(auc({1.0, 2.0}, {0, 0}) == doctest::Approx(0.5));  // one-class fallback

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
      labels.push_back(rng.uniform() < 0.3 ? 1 : 0);
      scores.push_back(std::round(rng.gaussian() * 4.0) / 4.0 +
                       (labels.back() == 1 ? 0.5 : 0.0));
    }
    CHECK(auc(scores, labels) ==
          doctest::Approx(oracles::pairwise_auc(scores, labels))
              .epsilon(1e-12));
  }
}

TEST_CASE("run_experiment: ggm smoke run populates the report") {
  const ExperimentConfig config = config_from_json(smoke_config_json("ggm"));
  const ExperimentOutput output = run_experiment(config);
  const RunReport& report = output.report;
  CHECK(report.model == "ggm");
  CHECK(report.auc >= 0.0);
  CHECK(report.auc <= 1.0);
  CHECK_FALSE(report.objective_history.empty());
  CHECK_FALSE(report.consensus_iterations.empty());
  CHECK_FALSE(report.scores.empty());
  CHECK_FALSE(report.privacy.is_null());
  CHECK(output.ggm_result.has_value());
  CHECK(report.privacy.at("audit").at("violations").get<int>() == 0);
}

TEST_CASE("run_experiment: mtvae with zero epochs still yields a report") {
  nlohmann::json j = smoke_config_json("mtvae");
  j["mtvae"]["epochs"] = 0;
  const ExperimentOutput output = run_experiment(config_from_json(j));
  CHECK(output.report.model == "mtvae");
  CHECK(output.report.objective_history.empty());
  CHECK_FALSE(output.report.scores.empty());
  CHECK(output.report.auc >= 0.0);
  CHECK(output.mtvae_result.has_value());
}

TEST_CASE("run_experiment: identical config and seed reproduce the report") {
  const ExperimentConfig config = config_from_json(smoke_config_json("ggm"));
  const ExperimentOutput a = run_experiment(config);
  const ExperimentOutput b = run_experiment(config);
  CHECK(a.report.to_json(false).dump() == b.report.to_json(false).dump());
}

TEST_CASE("run_experiment: stage timings account for the wall clock") {
  nlohmann::json j = smoke_config_json("ggm");
  j["consensus"]["tol"] = 1e-11;
  j["data"]["synthetic"]["samples_per_participant"] = 400;
  const ExperimentOutput output = run_experiment(config_from_json(j));
  double stage_sum = 0.0;
  for (const auto& [name, seconds] : output.report.timings)
    stage_sum += seconds;
  CHECK(std::abs(stage_sum - output.report.total_seconds) <=
        0.05 * output.report.total_seconds + 1e-3);
}

TEST_CASE("run_experiment: stage failures carry the stage tag") {
  nlohmann::json j = smoke_config_json("ggm");
  j["graph"] = {{"kind", "inverse-chord"}, {"size", 9}};  // 9 is not prime
  try {
    run_experiment(config_from_json(j));
    FAIL("expected a stage-tagged failure");
  } catch (const std::exception& error) {
    CHECK(std::string(error.what()).rfind("[graph]", 0) == 0);
  }
}

TEST_CASE("export_report: files round trip and stay consistent") {
  const ExperimentConfig config = config_from_json(smoke_config_json("ggm"));
  const ExperimentOutput output = run_experiment(config);
  TempDir dir("collabdict_harness_test");
  export_report(output.report, dir.path);

  std::ifstream report_in(dir.path / "report.json");
  nlohmann::json parsed;
  report_in >> parsed;
  CHECK(parsed.at("auc").get<double>() ==
        doctest::Approx(output.report.auc).epsilon(1e-12));
  CHECK(parsed.at("scores").size() == output.report.scores.size());

  // Score CSV: row count and an independent AUC recomputation.
  std::ifstream csv(dir.path / "scores.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "participant,index,score,label");
  std::vector<double> scores;
  std::vector<int> labels;
  while (std::getline(csv, line)) {
    double score = 0.0;
    int participant = 0;
    int index = 0;
    int label = 0;
    CHECK(std::sscanf(line.c_str(), "%d,%d,%lf,%d", &participant, &index,
                      &score, &label) == 4);
    scores.push_back(score);
    labels.push_back(label);
  }
  CHECK(scores.size() == output.report.scores.size());
  CHECK(std::abs(oracles::pairwise_auc(scores, labels) - output.report.auc) <
        1e-9);
}

TEST_CASE("config json: defaults are filled and echoed") {
  nlohmann::json j;
  j["model"] = "ggm";
  const ExperimentConfig config = config_from_json(j);
  CHECK(config.consensus.tol == 1e-9);
  CHECK(config.ggm.patterns == 2);
  CHECK(config.mtvae.eta == 1e-3);
  CHECK(config.holdout_fraction == 0.2);
  const nlohmann::json echo = config_to_json(config);
  CHECK(echo.at("privacy").at("ell0").get<double>() == 2.0);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"model", "unknown"}}),
                  std::invalid_argument);
}
