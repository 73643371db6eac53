#include "collabdict/ggm.hpp"

#include "collabdict/common.hpp"
#include "collabdict/gaussian.hpp"

#include <json.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace collabdict::ggm {

namespace {

using nlohmann::json;

Eigen::VectorXd resolved_prior_mean(const GgmHyper& hyper, Eigen::Index dim) {
  if (hyper.prior_mean.size() == 0) return Eigen::VectorXd::Zero(dim);
  if (hyper.prior_mean.size() != dim)
    throw std::invalid_argument("ggm: prior mean dimension mismatch");
  return hyper.prior_mean;
}

// Per-sample, per-pattern log densities plus log weights, N x K.
Eigen::MatrixXd log_posterior_terms(const Dataset& data,
                                    const Eigen::VectorXd& weights,
                                    const GgmGlobal& global) {
  const Eigen::Index n = data.rows();
  const int k = global.pattern_count();
  Eigen::MatrixXd terms(n, k);
  for (int c = 0; c < k; ++c) {
    const Eigen::MatrixXd& precision = global.precisions[c];
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
      throw NumericalError("ggm: pattern precision not positive definite");
    const double log_det =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double log_norm =
        -0.5 * data.cols() * std::log(2.0 * M_PI) + 0.5 * log_det;
    const double log_weight =
        weights[c] > 0.0 ? std::log(weights[c])
                         : -std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd centered =
        data.rowwise() - global.means[c].transpose();
    const Eigen::VectorXd quad =
        ((centered * precision).array() * centered.array()).rowwise().sum();
    terms.col(c) = (log_weight + log_norm) - 0.5 * quad.array();
  }
  return terms;
}

void check_model(const GgmGlobal& global) {
  if (global.means.empty() ||
      global.means.size() != global.precisions.size())
    throw std::invalid_argument("ggm: malformed global parameters");
}

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return json(flat);
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows,
                                 Eigen::Index cols) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != rows * cols)
    throw std::invalid_argument("ggm checkpoint: matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = values[idx++];
  return m;
}

}  // namespace

Eigen::VectorXd responsibilities(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& weights,
                                 const GgmGlobal& global) {
  check_model(global);
  if (weights.size() != global.pattern_count())
    throw std::invalid_argument("ggm: weight/pattern count mismatch");
  Dataset row(1, x.size());
  row.row(0) = x.transpose();
  const Eigen::MatrixXd terms = log_posterior_terms(row, weights, global);
  const Eigen::VectorXd log_terms = terms.row(0).transpose();
  const double norm = log_sum_exp(log_terms);
  return (log_terms.array() - norm).exp();
}

std::pair<GgmLocal, SuffStats> local_update(const Dataset& data,
                                            const GgmLocal& local,
                                            const GgmGlobal& global) {
  check_model(global);
  if (data.rows() == 0) throw std::invalid_argument("ggm: empty dataset");
  if (data.cols() != global.dim())
    throw std::invalid_argument("ggm: dataset dimension mismatch");
  const Eigen::Index n = data.rows();
  const int k = global.pattern_count();

  const Eigen::MatrixXd terms =
      log_posterior_terms(data, local.mixture_weights, global);
  Eigen::MatrixXd resp(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = log_sum_exp(terms.row(i).transpose());
    resp.row(i) = (terms.row(i).array() - norm).exp();
  }

  SuffStats stats;
  stats.counts = resp.colwise().sum().transpose();
  stats.first_moments.resize(k);
  stats.second_moments.resize(k);
  for (int c = 0; c < k; ++c) {
    stats.first_moments[c] = data.transpose() * resp.col(c);
    stats.second_moments[c] =
        data.transpose() * resp.col(c).asDiagonal() * data;
    stats.second_moments[c] =
        ((stats.second_moments[c] + stats.second_moments[c].transpose()) / 2.0)
            .eval();
  }

  GgmLocal updated;
  updated.mixture_weights = stats.counts / stats.counts.sum();
  updated.responsibilities = std::move(resp);
  return {std::move(updated), std::move(stats)};
}

namespace {

// Statistics are exchanged as one flat row per participant:
// [counts (K), first moments (K*M), second moments (K*M*M)].
Eigen::MatrixXd flatten_stats(const std::vector<SuffStats>& stats) {
  const int participants = static_cast<int>(stats.size());
  const int k = static_cast<int>(stats[0].counts.size());
  const Eigen::Index m = stats[0].first_moments[0].size();
  const Eigen::Index width = k + k * m + k * m * m;
  Eigen::MatrixXd rows(participants, width);
  for (int s = 0; s < participants; ++s) {
    Eigen::Index at = 0;
    rows.block(s, 0, 1, k) = stats[s].counts.transpose();
    at += k;
    for (int c = 0; c < k; ++c, at += m)
      rows.block(s, at, 1, m) = stats[s].first_moments[c].transpose();
    for (int c = 0; c < k; ++c, at += m * m)
      rows.block(s, at, 1, m * m) =
          stats[s].second_moments[c].reshaped().transpose();
  }
  return rows;
}

Aggregates unflatten_totals(const Eigen::VectorXd& totals, int k,
                            Eigen::Index m) {
  Aggregates agg;
  agg.counts = totals.segment(0, k);
  agg.means.resize(k);
  agg.scatters.resize(k);
  Eigen::Index at = k;
  for (int c = 0; c < k; ++c, at += m)
    agg.means[c] = totals.segment(at, m);
  for (int c = 0; c < k; ++c, at += m * m)
    agg.scatters[c] = totals.segment(at, m * m).reshaped(m, m);
  for (int c = 0; c < k; ++c) {
    if (agg.counts[c] > 0.0) {
      agg.means[c] /= agg.counts[c];
      agg.scatters[c] /= agg.counts[c];
      agg.scatters[c] =
          ((agg.scatters[c] + agg.scatters[c].transpose()) / 2.0).eval();
    } else {
      // Flagged for pruning; the moments carry no usable information.
      agg.means[c].setZero();
      agg.scatters[c].setZero();
    }
  }
  return agg;
}

}  // namespace

Aggregates pool_stats(const std::vector<SuffStats>& stats) {
  if (stats.empty()) throw std::invalid_argument("ggm: no statistics to pool");
  const Eigen::MatrixXd rows = flatten_stats(stats);
  const Eigen::VectorXd totals = rows.colwise().sum().transpose();
  return unflatten_totals(totals, static_cast<int>(stats[0].counts.size()),
                          stats[0].first_moments[0].size());
}

std::vector<Aggregates> aggregate(const std::vector<SuffStats>& stats,
                                  consensus::ConsensusSession& session) {
  if (stats.empty()) throw std::invalid_argument("ggm: no statistics to pool");
  if (static_cast<int>(stats.size()) != session.participants())
    throw std::invalid_argument("ggm: participant count mismatch");
  const int k = static_cast<int>(stats[0].counts.size());
  const Eigen::Index m = stats[0].first_moments[0].size();
  const Eigen::MatrixXd sums = session.sum_views(flatten_stats(stats));
  std::vector<Aggregates> views;
  views.reserve(stats.size());
  for (Eigen::Index s = 0; s < sums.rows(); ++s)
    views.push_back(unflatten_totals(sums.row(s).transpose(), k, m));
  return views;
}

std::vector<int> prune(const Aggregates& agg, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("ggm: delta must be > 0");
  std::vector<int> keep;
  for (int c = 0; c < agg.counts.size(); ++c)
    if (agg.counts[c] >= delta) keep.push_back(c);
  if (keep.empty())
    throw ModelCollapseError("ggm: every component fell below delta");
  return keep;
}

Aggregates filter_components(const Aggregates& agg,
                             const std::vector<int>& keep) {
  Aggregates out;
  out.counts.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.counts[static_cast<Eigen::Index>(i)] = agg.counts[keep[i]];
    out.means.push_back(agg.means[keep[i]]);
    out.scatters.push_back(agg.scatters[keep[i]]);
  }
  return out;
}

GgmGlobal filter_components(const GgmGlobal& global,
                            const std::vector<int>& keep) {
  GgmGlobal out;
  out.hyper = global.hyper;
  for (int idx : keep) {
    out.means.push_back(global.means[idx]);
    out.precisions.push_back(global.precisions[idx]);
  }
  return out;
}

GgmLocal filter_components(const GgmLocal& local,
                           const std::vector<int>& keep) {
  GgmLocal out;
  out.mixture_weights.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i)
    out.mixture_weights[static_cast<Eigen::Index>(i)] =
        local.mixture_weights[keep[i]];
  const double total = out.mixture_weights.sum();
  if (total > 0.0) out.mixture_weights /= total;

  if (local.responsibilities.size() > 0) {
    out.responsibilities.resize(local.responsibilities.rows(),
                                static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i)
      out.responsibilities.col(static_cast<Eigen::Index>(i)) =
          local.responsibilities.col(keep[i]);
    const Eigen::VectorXd row_sums = out.responsibilities.rowwise().sum();
    for (Eigen::Index r = 0; r < out.responsibilities.rows(); ++r)
      if (row_sums[r] > 0.0) out.responsibilities.row(r) /= row_sums[r];
  }
  return out;
}

Eigen::MatrixXd pattern_covariance(double count, const Eigen::VectorXd& mean,
                                   const Eigen::MatrixXd& scatter,
                                   const GgmHyper& hyper) {
  const Eigen::VectorXd m0 = resolved_prior_mean(hyper, mean.size());
  const Eigen::VectorXd shift = mean - m0;
  return scatter - mean * mean.transpose() +
         (hyper.lambda0 / (hyper.lambda0 + count)) * shift * shift.transpose();
}

Eigen::MatrixXd solver_covariance(double count, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& scatter,
                                  const GgmHyper& hyper) {
  const Eigen::Index m = mean.size();
  Eigen::MatrixXd sigma = pattern_covariance(count, mean, scatter, hyper);
  const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma)
                             .eigenvalues()
                             .minCoeff();
  const double scale = std::max(sigma.trace() / m, 1.0);
  if (min_eig < -1e-6 * scale)
    throw NumericalError("ggm: pattern covariance lost semidefiniteness");
  const double trace = sigma.trace();
  const double ridge = 1e-8 * (trace > 0.0 ? trace / m : 1.0);
  sigma.diagonal().array() += ridge + std::max(0.0, -min_eig);
  return sigma;
}

GgmGlobal optimize_global(const Aggregates& agg, const GgmHyper& hyper) {
  const int k = static_cast<int>(agg.counts.size());
  if (k == 0) throw std::invalid_argument("ggm: no components to optimize");
  if (!(hyper.lambda0 > 0.0))
    throw std::invalid_argument("ggm: lambda0 must be > 0");
  const Eigen::Index m = agg.means[0].size();
  const Eigen::VectorXd m0 = resolved_prior_mean(hyper, m);

  GgmGlobal global;
  global.hyper = hyper;
  global.means.resize(k);
  global.precisions.resize(k);
  for (int c = 0; c < k; ++c) {
    const double count = agg.counts[c];
    if (!(count > 0.0))
      throw std::invalid_argument(
          "ggm: non-positive component count reached optimize_global");
    global.means[c] = (hyper.lambda0 * m0 + count * agg.means[c]) /
                      (hyper.lambda0 + count);
    const Eigen::MatrixXd sigma =
        solver_covariance(count, agg.means[c], agg.scatters[c], hyper);
    global.precisions[c] = graphical_lasso(sigma, hyper.rho, count);
  }
  return global;
}

double anomaly_score(const Eigen::VectorXd& x, const Eigen::VectorXd& weights,
                     const GgmGlobal& global) {
  check_model(global);
  const Eigen::VectorXd r = responsibilities(x, weights, global);
  double score = 0.0;
  for (int c = 0; c < global.pattern_count(); ++c) {
    if (r[c] == 0.0) continue;  // fully underflowed pattern contributes nothing
    score -= r[c] * log_mvn_precision(x, global.means[c], global.precisions[c]);
  }
  return score;
}

double map_objective(const std::vector<Dataset>& datasets,
                     const GgmGlobal& global,
                     const std::vector<GgmLocal>& locals) {
  check_model(global);
  double objective = 0.0;
  for (std::size_t s = 0; s < datasets.size(); ++s) {
    const Eigen::MatrixXd terms = log_posterior_terms(
        datasets[s], locals[s].mixture_weights, global);
    for (Eigen::Index i = 0; i < terms.rows(); ++i)
      objective += log_sum_exp(terms.row(i).transpose());
  }
  const Eigen::VectorXd m0 =
      resolved_prior_mean(global.hyper, global.dim());
  for (int c = 0; c < global.pattern_count(); ++c) {
    const Eigen::MatrixXd& precision = global.precisions[c];
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    const double log_det =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Eigen::VectorXd shift = global.means[c] - m0;
    objective += 0.5 * log_det -
                 0.5 * global.hyper.lambda0 * shift.dot(precision * shift) -
                 0.5 * global.hyper.rho * precision.cwiseAbs().sum();
  }
  return objective;
}

GgmGlobal initial_global(const std::vector<Dataset>& datasets,
                         int pattern_count, const GgmHyper& hyper,
                         std::uint64_t seed) {
  if (pattern_count < 1)
    throw std::invalid_argument("ggm: pattern_count must be >= 1");
  Eigen::Index total = 0;
  for (const Dataset& d : datasets) total += d.rows();
  if (total < pattern_count)
    throw std::invalid_argument("ggm: fewer samples than patterns");
  const Eigen::Index m = datasets[0].cols();

  Dataset pooled(total, m);
  Eigen::Index at = 0;
  for (const Dataset& d : datasets) {
    pooled.middleRows(at, d.rows()) = d;
    at += d.rows();
  }
  const Eigen::VectorXd center = pooled.colwise().mean().transpose();
  const Eigen::VectorXd scale =
      ((pooled.rowwise() - center.transpose()).array().square().colwise().sum() /
       std::max<Eigen::Index>(total - 1, 1))
          .sqrt()
          .transpose();

  Rng rng(seed);
  std::vector<Eigen::Index> chosen;
  while (static_cast<int>(chosen.size()) < pattern_count) {
    const Eigen::Index idx = rng.uniform_int(static_cast<int>(total));
    if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end())
      chosen.push_back(idx);
  }

  GgmGlobal global;
  global.hyper = hyper;
  for (Eigen::Index idx : chosen) {
    Eigen::VectorXd mean = pooled.row(idx).transpose();
    for (Eigen::Index j = 0; j < m; ++j)
      mean[j] += 0.01 * (scale[j] + 1e-12) * rng.gaussian();
    global.means.push_back(std::move(mean));
    global.precisions.push_back(Eigen::MatrixXd::Identity(m, m));
  }
  return global;
}

FitResult fit(const std::vector<Dataset>& datasets,
              const topology::Graph* graph, const FitOptions& options) {
  const int participants = static_cast<int>(datasets.size());
  if (participants == 0)
    throw std::invalid_argument("ggm fit: no datasets");
  if (options.max_rounds < 1)
    throw std::invalid_argument("ggm fit: max_rounds must be >= 1");
  for (const Dataset& d : datasets)
    if (d.rows() == 0 || d.cols() != datasets[0].cols())
      throw std::invalid_argument("ggm fit: malformed datasets");

  const bool exact = options.exact_aggregation || participants == 1;
  consensus::ConsensusSession session =
      exact ? consensus::ConsensusSession::exact(participants)
            : [&] {
                if (!graph || graph->size() != participants)
                  throw std::invalid_argument(
                      "ggm fit: graph/participant mismatch");
                const topology::WeightMatrix w =
                    topology::consensus_weights(*graph);
                if (!topology::spectral_gap(w).contraction_ok)
                  throw std::invalid_argument(
                      "ggm fit: consensus weights cannot contract");
                return consensus::ConsensusSession::network(w,
                                                            options.consensus);
              }();

  FitResult result;
  GgmGlobal init = initial_global(datasets, options.pattern_count,
                                  options.hyper, options.seed);
  std::vector<GgmGlobal> globals(participants, init);
  std::vector<GgmLocal> locals(participants);
  for (int s = 0; s < participants; ++s)
    locals[s].mixture_weights = Eigen::VectorXd::Constant(
        options.pattern_count, 1.0 / options.pattern_count);

  std::vector<int> alive(options.pattern_count);
  for (int c = 0; c < options.pattern_count; ++c) alive[c] = c;

  std::vector<Aggregates> views;
  for (int round = 0; round < options.max_rounds; ++round) {
    std::vector<SuffStats> stats(participants);
    for (int s = 0; s < participants; ++s) {
      auto [updated, stat] = local_update(datasets[s], locals[s], globals[s]);
      locals[s] = std::move(updated);
      stats[s] = std::move(stat);
    }

    views = aggregate(stats, session);
    result.consensus_iterations.push_back(session.last_iterations());

    // All views agree to consensus tolerance; participant 0 decides pruning
    // so every node drops the same components.
    const std::vector<int> keep = prune(views[0], options.hyper.delta);
    const bool pruned = keep.size() != static_cast<std::size_t>(
                                           views[0].counts.size());
    if (pruned) {
      std::vector<int> next_alive;
      for (int idx : keep) next_alive.push_back(alive[idx]);
      alive = std::move(next_alive);
      for (int s = 0; s < participants; ++s) {
        views[s] = filter_components(views[s], keep);
        locals[s] = filter_components(locals[s], keep);
        globals[s] = filter_components(globals[s], keep);
      }
    }

    const GgmGlobal previous = globals[0];
    for (int s = 0; s < participants; ++s)
      globals[s] = optimize_global(views[s], options.hyper);

    result.objective.push_back(map_objective(datasets, globals[0], locals));
    result.rounds = round + 1;

    if (!pruned && previous.pattern_count() == globals[0].pattern_count()) {
      double change = 0.0;
      for (int c = 0; c < globals[0].pattern_count(); ++c) {
        change = std::max(
            change, (globals[0].means[c] - previous.means[c])
                            .cwiseAbs()
                            .maxCoeff() /
                        (1.0 + previous.means[c].cwiseAbs().maxCoeff()));
        change = std::max(
            change, (globals[0].precisions[c] - previous.precisions[c])
                            .cwiseAbs()
                            .maxCoeff() /
                        (1.0 + previous.precisions[c].cwiseAbs().maxCoeff()));
      }
      if (change < options.param_tol) break;
    }
  }

  for (int s = 1; s < participants; ++s)
    for (int c = 0; c < globals[0].pattern_count(); ++c) {
      result.max_view_divergence = std::max(
          result.max_view_divergence,
          (globals[s].means[c] - globals[0].means[c]).cwiseAbs().maxCoeff());
      result.max_view_divergence =
          std::max(result.max_view_divergence,
                   (globals[s].precisions[c] - globals[0].precisions[c])
                       .cwiseAbs()
                       .maxCoeff());
    }

  result.global = globals[0];
  result.participant_globals = std::move(globals);
  result.locals = std::move(locals);
  result.aggregates = std::move(views[0]);
  result.retained = std::move(alive);
  return result;
}

void save_checkpoint(const GgmGlobal& global,
                     const std::vector<GgmLocal>& locals, std::ostream& out) {
  json j;
  j["model"] = "ggm";
  j["patterns"] = global.pattern_count();
  j["dim"] = global.dim();
  j["hyper"] = {{"lambda0", global.hyper.lambda0},
                {"rho", global.hyper.rho},
                {"delta", global.hyper.delta},
                {"prior_mean", vector_to_json(resolved_prior_mean(
                                   global.hyper, global.dim()))}};
  json means = json::array();
  json precisions = json::array();
  for (int c = 0; c < global.pattern_count(); ++c) {
    means.push_back(vector_to_json(global.means[c]));
    precisions.push_back(matrix_to_json(global.precisions[c]));
  }
  j["means"] = std::move(means);
  j["precisions"] = std::move(precisions);
  json weights = json::array();
  for (const GgmLocal& local : locals)
    weights.push_back(vector_to_json(local.mixture_weights));
  j["mixture_weights"] = std::move(weights);
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(std::istream& in) {
  json j;
  in >> j;
  if (j.value("model", "") != "ggm")
    throw std::invalid_argument("ggm checkpoint: wrong model tag");
  const int k = j.at("patterns").get<int>();
  const Eigen::Index m = j.at("dim").get<Eigen::Index>();

  Checkpoint checkpoint;
  checkpoint.global.hyper.lambda0 = j.at("hyper").at("lambda0").get<double>();
  checkpoint.global.hyper.rho = j.at("hyper").at("rho").get<double>();
  checkpoint.global.hyper.delta = j.at("hyper").at("delta").get<double>();
  checkpoint.global.hyper.prior_mean =
      vector_from_json(j.at("hyper").at("prior_mean"));
  for (int c = 0; c < k; ++c) {
    checkpoint.global.means.push_back(vector_from_json(j.at("means").at(c)));
    checkpoint.global.precisions.push_back(
        matrix_from_json(j.at("precisions").at(c), m, m));
    if (checkpoint.global.means.back().size() != m)
      throw std::invalid_argument("ggm checkpoint: mean size mismatch");
  }
  for (const json& w : j.at("mixture_weights"))
    checkpoint.mixture_weights.push_back(vector_from_json(w));
  return checkpoint;
}

Dataset load_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    bool parse_ok = true;
    while (std::getline(fields, field, ',')) {
      try {
        std::size_t used = 0;
        const double value = std::stod(field, &used);
        row.push_back(value);
      } catch (const std::exception&) {
        parse_ok = false;
        break;
      }
    }
    if (!parse_ok) {
      if (first) {
        first = false;  // header line
        continue;
      }
      throw std::invalid_argument("csv: unparsable row: " + line);
    }
    if (!rows.empty() && row.size() != rows[0].size())
      throw std::invalid_argument("csv: inconsistent column count");
    rows.push_back(std::move(row));
    first = false;
  }
  if (rows.empty()) throw std::invalid_argument("csv: no samples");
  Dataset data(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return data;
}

void save_csv(const Dataset& data, std::ostream& out) {
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (j > 0) out << ',';
      out << data(i, j);
    }
    out << '\n';
  }
}

}  // namespace collabdict::ggm
