#pragma once

#include "collabdict/topology.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace collabdict::consensus {

/// State of one decentralized averaging run: one value per participant.
struct ConsensusVector {
  Eigen::VectorXd values;
  int iteration = 0;
};

/// Additive decomposition of per-participant values into `chunk_count` shares;
/// column s holds the shares of participant s and sums back to the original.
struct ChunkPlan {
  int chunk_count;
  Eigen::MatrixXd chunks;  // chunk_count x S
};

/// One value sent over one directed edge during a consensus run. Iteration t
/// carries the state before the (t+1)-th update, so iteration-0 records are
/// the values each peer reveals first.
struct MessageRecord {
  int chunk;
  int iteration;
  int from;
  int to;
  double value;
};

struct MessageLog {
  std::vector<MessageRecord> records;
};

struct ConsensusResult {
  double average;
  int iterations;
  Eigen::VectorXd final_values;
};

/// One synchronous update xi(t+1) = W xi(t).
ConsensusVector step(const ConsensusVector& x, const topology::WeightMatrix& w);

/// Iterates until both the successive max-norm change and the max pairwise
/// spread fall below tol. Throws ConvergenceError (carrying the residual
/// spread) when max_iter is exhausted. Optional trace receives
/// `iter,node,value` CSV rows; optional log records every edge message.
ConsensusResult run(const Eigen::VectorXd& x0, const topology::WeightMatrix& w,
                    double tol, int max_iter, MessageLog* log = nullptr,
                    std::ostream* trace = nullptr);

/// Splits each value into chunk_count additive shares: the first C-1 are
/// uniform on [-A, A] with A = max(1, |value|), the last is the residual.
ChunkPlan chunk(const Eigen::VectorXd& values, int chunk_count,
                std::uint64_t seed);

/// Runs one consensus per chunk and sums the chunk averages, so no peer ever
/// observes a raw initial value when chunk_count >= 2.
ConsensusResult run_chunked(const Eigen::VectorXd& x0,
                            const topology::WeightMatrix& w, int chunk_count,
                            double tol, int max_iter, std::uint64_t seed,
                            MessageLog* log = nullptr);

/// Batched aggregation of arbitrary tensors: each participant contributes one
/// row of flattened elements and receives its own converged view per element.
/// Network mode drives all elements of all chunks through the xi <- W xi loop;
/// exact mode computes the true mean directly (single-participant runs and
/// oracle-grade tests).
class ConsensusSession {
 public:
  struct Options {
    double tol = 1e-9;
    int max_iter = 20000;
    int chunks = 1;
    std::uint64_t seed = 0;
  };

  static ConsensusSession exact(int participants);
  static ConsensusSession network(topology::WeightMatrix w, Options options);

  /// rows: participants x elements. Returns per-participant views of the
  /// network mean, same shape.
  Eigen::MatrixXd mean_views(const Eigen::MatrixXd& rows);

  /// S times mean_views: per-participant views of the network sum.
  Eigen::MatrixXd sum_views(const Eigen::MatrixXd& rows);

  int participants() const { return participants_; }
  bool is_exact() const { return exact_; }

  /// W-multiplications spent by the most recent call (0 in exact mode).
  int last_iterations() const { return last_iterations_; }

 private:
  ConsensusSession() = default;

  bool exact_ = true;
  int participants_ = 0;
  topology::WeightMatrix weights_;
  Options options_;
  int last_iterations_ = 0;
  std::uint64_t invocation_ = 0;
};

}  // namespace collabdict::consensus
