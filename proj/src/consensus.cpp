#include "collabdict/consensus.hpp"

#include "collabdict/common.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace collabdict::consensus {

namespace {

double spread(const Eigen::VectorXd& v) { return v.maxCoeff() - v.minCoeff(); }

void log_messages(MessageLog* log, const topology::WeightMatrix& w,
                  const Eigen::VectorXd& x, int chunk, int iteration) {
  if (!log) return;
  const int s = w.size();
  for (int from = 0; from < s; ++from)
    for (int to = 0; to < s; ++to)
      if (to != from && w.entries(to, from) != 0.0)
        log->records.push_back({chunk, iteration, from, to, x[from]});
}

void write_trace(std::ostream* trace, int iteration, const Eigen::VectorXd& x) {
  if (!trace) return;
  for (Eigen::Index node = 0; node < x.size(); ++node)
    *trace << iteration << ',' << node << ',' << x[node] << '\n';
}

ConsensusResult run_one_chunk(const Eigen::VectorXd& x0,
                              const topology::WeightMatrix& w, double tol,
                              int max_iter, MessageLog* log, int chunk_index,
                              std::ostream* trace) {
  if (x0.size() != w.size())
    throw std::invalid_argument("consensus: vector/weight size mismatch");
  if (tol <= 0.0) throw std::invalid_argument("consensus: tol must be > 0");

  Eigen::VectorXd x = x0;
  write_trace(trace, 0, x);
  if (spread(x) < tol) return {x.mean(), 0, std::move(x)};

  for (int t = 0; t < max_iter; ++t) {
    log_messages(log, w, x, chunk_index, t);
    Eigen::VectorXd next = w.entries * x;
    const double change = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    write_trace(trace, t + 1, x);
    if (change < tol && spread(x) < tol) return {x.mean(), t + 1, std::move(x)};
  }
  throw ConvergenceError("consensus did not converge within max_iter",
                         spread(x));
}

}  // namespace

ConsensusVector step(const ConsensusVector& x,
                     const topology::WeightMatrix& w) {
  if (x.values.size() != w.size())
    throw std::invalid_argument("consensus: vector/weight size mismatch");
  return {w.entries * x.values, x.iteration + 1};
}

ConsensusResult run(const Eigen::VectorXd& x0, const topology::WeightMatrix& w,
                    double tol, int max_iter, MessageLog* log,
                    std::ostream* trace) {
  return run_one_chunk(x0, w, tol, max_iter, log, 0, trace);
}

ChunkPlan chunk(const Eigen::VectorXd& values, int chunk_count,
                std::uint64_t seed) {
  if (chunk_count < 1)
    throw std::invalid_argument("chunk: chunk_count must be >= 1");
  const Eigen::Index s = values.size();
  Eigen::MatrixXd chunks(chunk_count, s);
  Rng rng(seed);
  for (Eigen::Index col = 0; col < s; ++col) {
    const double amplitude = std::max(1.0, std::abs(values[col]));
    double partial = 0.0;
    for (int l = 0; l + 1 < chunk_count; ++l) {
      chunks(l, col) = rng.uniform(-amplitude, amplitude);
      partial += chunks(l, col);
    }
    chunks(chunk_count - 1, col) = values[col] - partial;
    // Nudge the residual until the sequentially evaluated column sum
    // reproduces the original bit for bit (one rounding can be left over).
    for (int refine = 0; refine < 4; ++refine) {
      double total = 0.0;
      for (int l = 0; l < chunk_count; ++l) total += chunks(l, col);
      if (total == values[col]) break;
      chunks(chunk_count - 1, col) += values[col] - total;
    }
  }
  return {chunk_count, std::move(chunks)};
}

ConsensusResult run_chunked(const Eigen::VectorXd& x0,
                            const topology::WeightMatrix& w, int chunk_count,
                            double tol, int max_iter, std::uint64_t seed,
                            MessageLog* log) {
  const ChunkPlan plan = chunk(x0, chunk_count, seed);
  double average = 0.0;
  int iterations = 0;
  Eigen::VectorXd final_values = Eigen::VectorXd::Zero(x0.size());
  for (int l = 0; l < chunk_count; ++l) {
    const ConsensusResult part = run_one_chunk(
        plan.chunks.row(l).transpose(), w, tol, max_iter, log, l, nullptr);
    average += part.average;
    iterations += part.iterations;
    final_values += part.final_values;
  }
  return {average, iterations, std::move(final_values)};
}

ConsensusSession ConsensusSession::exact(int participants) {
  if (participants < 1)
    throw std::invalid_argument("session: participants must be >= 1");
  ConsensusSession session;
  session.exact_ = true;
  session.participants_ = participants;
  return session;
}

ConsensusSession ConsensusSession::network(topology::WeightMatrix w,
                                           Options options) {
  if (options.chunks < 1)
    throw std::invalid_argument("session: chunks must be >= 1");
  ConsensusSession session;
  session.exact_ = false;
  session.participants_ = w.size();
  session.weights_ = std::move(w);
  session.options_ = options;
  return session;
}

Eigen::MatrixXd ConsensusSession::mean_views(const Eigen::MatrixXd& rows) {
  if (rows.rows() != participants_)
    throw std::invalid_argument("session: one row per participant expected");
  last_iterations_ = 0;
  if (exact_) {
    return rows.colwise().mean().replicate(participants_, 1);
  }

  const Eigen::Index elements = rows.cols();
  const std::uint64_t call_seed = mix_seed(options_.seed, invocation_++);

  // Additive chunking per element, residual chunk last.
  std::vector<Eigen::MatrixXd> chunked(options_.chunks);
  if (options_.chunks == 1) {
    chunked[0] = rows;
  } else {
    Rng rng(call_seed);
    Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(rows.rows(), elements);
    for (int l = 0; l + 1 < options_.chunks; ++l) {
      chunked[l] = rows.unaryExpr([&rng](double v) {
        const double amplitude = std::max(1.0, std::abs(v));
        return rng.uniform(-amplitude, amplitude);
      });
      partial += chunked[l];
    }
    chunked[options_.chunks - 1] = rows - partial;
  }

  Eigen::MatrixXd views = Eigen::MatrixXd::Zero(rows.rows(), elements);
  for (int l = 0; l < options_.chunks; ++l) {
    Eigen::MatrixXd x = std::move(chunked[l]);
    const auto converged = [&](const Eigen::MatrixXd& m) {
      return (m.colwise().maxCoeff() - m.colwise().minCoeff()).maxCoeff() <
             options_.tol;
    };
    if (!converged(x)) {
      bool done = false;
      for (int t = 0; t < options_.max_iter; ++t) {
        Eigen::MatrixXd next = weights_.entries * x;
        const double change = (next - x).cwiseAbs().maxCoeff();
        x = std::move(next);
        ++last_iterations_;
        if (change < options_.tol && converged(x)) {
          done = true;
          break;
        }
      }
      if (!done)
        throw ConvergenceError(
            "consensus session did not converge within max_iter",
            (x.colwise().maxCoeff() - x.colwise().minCoeff()).maxCoeff());
    }
    views += x;
  }
  return views;
}

Eigen::MatrixXd ConsensusSession::sum_views(const Eigen::MatrixXd& rows) {
  return static_cast<double>(participants_) * mean_views(rows);
}

}  // namespace collabdict::consensus
