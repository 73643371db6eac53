// collabdict: decentralized multi-task anomaly detection toolkit.
//
// Subcommands:
//   run    — execute an experiment described by a JSON config
//   gen    — materialize synthetic datasets from a spec file
//   audit  — privacy report for a trained GGM checkpoint against data
//   graph  — emit a P2P topology as an edge list

#include "collabdict/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

int run_command(const std::string& config_path, std::uint64_t seed,
                bool seed_given, const std::string& out_dir) {
  using namespace collabdict;
  harness::ExperimentConfig config =
      harness::config_from_json(read_json_file(config_path));
  if (seed_given) {
    json patched = read_json_file(config_path);
    patched["seed"] = seed;
    config = harness::config_from_json(patched);
  }

  const harness::ExperimentOutput output = harness::run_experiment(config);
  const std::filesystem::path dir(out_dir);
  harness::export_report(output.report, dir);

  if (output.ggm_result) {
    std::ofstream model(dir / "model.json");
    ggm::save_checkpoint(output.ggm_result->global, output.ggm_result->locals,
                         model);
  }
  if (output.mtvae_result) {
    std::ofstream model(dir / "model.json");
    mtvae::save_checkpoint(*output.mtvae_result, model);
    std::ofstream log(dir / "training_log.csv");
    mtvae::write_training_log(output.mtvae_result->history, log);
  }

  std::cout << "model=" << output.report.model
            << " auc=" << output.report.auc
            << " rounds=" << output.report.objective_history.size()
            << " total_seconds=" << output.report.total_seconds << '\n'
            << "report: " << (dir / "report.json").string() << '\n';
  return 0;
}

int gen_command(const std::string& spec_path, const std::string& out_dir) {
  using namespace collabdict;
  const harness::SyntheticSpec spec =
      harness::synthetic_spec_from_json(read_json_file(spec_path));
  const harness::SyntheticData data = harness::generate_synthetic(spec);

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  for (std::size_t s = 0; s < data.datasets.size(); ++s) {
    std::ofstream csv(dir / ("data_" + std::to_string(s) + ".csv"));
    ggm::save_csv(data.datasets[s], csv);
    std::ofstream labels(dir / ("labels_" + std::to_string(s) + ".csv"));
    for (int label : data.labels[s]) labels << label << '\n';
  }
  std::cout << "wrote " << data.datasets.size() << " participant datasets to "
            << dir.string() << '\n';
  return 0;
}

int audit_command(const std::string& model_path, const std::string& data_dir,
                  double ell0, int trials, std::uint64_t seed,
                  const std::string& out_path) {
  using namespace collabdict;
  std::ifstream model_in(model_path);
  if (!model_in) throw std::runtime_error("cannot open " + model_path);
  const ggm::Checkpoint checkpoint = ggm::load_checkpoint(model_in);

  std::vector<ggm::Dataset> datasets;
  for (int s = 0;; ++s) {
    const std::filesystem::path file =
        std::filesystem::path(data_dir) / ("data_" + std::to_string(s) + ".csv");
    if (!std::filesystem::exists(file)) break;
    std::ifstream in(file);
    datasets.push_back(ggm::load_csv(in));
  }
  if (datasets.empty())
    throw std::runtime_error("no data_<s>.csv files under " + data_dir);
  if (datasets.size() != checkpoint.mixture_weights.size())
    throw std::runtime_error(
        "checkpoint participant count does not match the data directory");

  // Re-derive responsibilities and pooled statistics from the released model.
  std::vector<ggm::GgmLocal> locals;
  std::vector<ggm::SuffStats> stats;
  for (std::size_t s = 0; s < datasets.size(); ++s) {
    ggm::GgmLocal local;
    local.mixture_weights = checkpoint.mixture_weights[s];
    auto [updated, stat] =
        ggm::local_update(datasets[s], local, checkpoint.global);
    locals.push_back(std::move(updated));
    stats.push_back(std::move(stat));
  }
  const ggm::Aggregates aggregates = ggm::pool_stats(stats);

  privacy::PrivacyOptions options;
  options.ell0 = ell0;
  options.audit_trials = trials;
  options.seed = seed;
  const json report = harness::privacy_report_json(privacy::privacy_report(
      checkpoint.global, aggregates, datasets, locals, options));

  if (out_path.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << report.dump(2) << '\n';
    std::cout << "privacy report: " << out_path << '\n';
  }
  return 0;
}

int graph_command(const std::string& kind, int size,
                  const std::string& out_path) {
  using namespace collabdict;
  topology::Graph graph = kind == "inverse-chord"
                              ? topology::build_cycle_inverse_chord(size)
                              : topology::build_complete(size);
  if (out_path.empty()) {
    topology::save_edge_list(graph, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    topology::save_edge_list(graph, out);
    std::cout << "graph: " << out_path << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized multi-task anomaly detection toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string spec_path;
  std::string model_path;
  std::string data_dir;
  std::string out_path;
  std::string kind = "inverse-chord";
  std::uint64_t seed = 0;
  double ell0 = 2.0;
  int trials = 100;
  int size = 31;

  CLI::App* run = app.add_subcommand("run", "run an experiment from a config");
  run->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  CLI::Option* seed_option =
      run->add_option("--seed", seed, "override the config seed");
  std::string run_out = "out";
  run->add_option("--out", run_out, "output directory");

  CLI::App* gen = app.add_subcommand("gen", "generate synthetic datasets");
  gen->add_option("--spec", spec_path, "synthetic spec (JSON)")->required();
  std::string gen_out = "data";
  gen->add_option("--out", gen_out, "output directory")->required();

  CLI::App* audit = app.add_subcommand("audit", "privacy report for a checkpoint");
  audit->add_option("--model", model_path, "GGM checkpoint (JSON)")->required();
  audit->add_option("--data", data_dir, "directory with data_<s>.csv files")
      ->required();
  audit->add_option("--ell0", ell0, "diversity floor");
  audit->add_option("--trials", trials, "perturbation audit trials");
  audit->add_option("--seed", seed, "audit seed");
  audit->add_option("--out", out_path, "write the report here instead of stdout");

  CLI::App* graph = app.add_subcommand("graph", "emit a topology edge list");
  graph->add_option("--kind", kind, "inverse-chord | complete");
  graph->add_option("--size", size, "participant count")->required();
  graph->add_option("--out", out_path, "write the edge list here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return run_command(config_path, seed, seed_option->count() > 0, run_out);
    if (gen->parsed()) return gen_command(spec_path, gen_out);
    if (audit->parsed())
      return audit_command(model_path, data_dir, ell0, trials, seed, out_path);
    if (graph->parsed()) return graph_command(kind, size, out_path);
  } catch (const std::exception& error) {
    std::cerr << "collabdict: " << error.what() << '\n';
    return 1;
  }
  return 1;
}
