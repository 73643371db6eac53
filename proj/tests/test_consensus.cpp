#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "collabdict/common.hpp"
#include "collabdict/consensus.hpp"
#include "collabdict/topology.hpp"

#include <cmath>
#include <limits>
#include <sstream>

using namespace collabdict;
using namespace collabdict::consensus;
using namespace collabdict::topology;

namespace {

Graph path3() {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a(0, 1) = a(1, 0) = 1.0;
  a(1, 2) = a(2, 1) = 1.0;
  return make_graph(std::move(a));
}

Graph random_connected_graph(int size, int extra_edges, Rng& rng) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
  for (int v = 1; v < size; ++v) {
    const int u = rng.uniform_int(v);
    a(u, v) = a(v, u) = 1.0;
  }
  for (int e = 0; e < extra_edges; ++e) {
    const int u = rng.uniform_int(size);
    const int v = rng.uniform_int(size);
    if (u != v) a(u, v) = a(v, u) = 1.0;
  }
  return make_graph(std::move(a));
}

}  // namespace

TEST_CASE("step: constant vectors are fixed points") {
  const WeightMatrix w = consensus_weights(build_cycle_inverse_chord(7));
  const ConsensusVector x{Eigen::VectorXd::Constant(7, 3.25), 0};
  const ConsensusVector next = step(x, w);
  CHECK((next.values.array() - 3.25).abs().maxCoeff() < 1e-14);
  CHECK(next.iteration == 1);
}

TEST_CASE("step: complete graph averages in one step") {
  const WeightMatrix w = consensus_weights(build_complete(4));
  Eigen::VectorXd x0(4);
  x0 << 0, 0, 0, 4;
  const ConsensusVector next = step({x0, 0}, w);
  CHECK((next.values.array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("step: path graph, hand-applied elementwise update") {
  // xi^1 <- 3 + (1/3)(0-3) = 2, xi^2 <- 0 + (1/3)(3-0) = 1, xi^3 <- 0.
  const WeightMatrix w = consensus_weights(path3());
  Eigen::VectorXd x0(3);
  x0 << 3, 0, 0;
  const ConsensusVector next = step({x0, 0}, w);
  Eigen::VectorXd expected(3);
  expected << 2, 1, 0;
  CHECK((next.values - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("step: elementwise form matches the matrix form") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int size = 3 + rng.uniform_int(20);
    const Graph g = random_connected_graph(size, size, rng);
    const WeightMatrix w = consensus_weights(g);
    const Eigen::VectorXd x = rng.gaussian_vector(size);
    Eigen::VectorXd elementwise(size);
    for (int s = 0; s < size; ++s) {
      double acc = x[s];
      for (int j = 0; j < size; ++j)
        acc += g.adjacency(s, j) * (x[j] - x[s]) / size;
      elementwise[s] = acc;
    }
    const ConsensusVector matrix_form = step({x, 0}, w);
    CHECK((matrix_form.values - elementwise).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("step: dimension mismatch is rejected") {
  const WeightMatrix w = consensus_weights(build_complete(4));
  CHECK_THROWS_AS(step({Eigen::VectorXd::Zero(3), 0}, w),
                  std::invalid_argument);
}

TEST_CASE("run: complete graph reaches the exact mean immediately") {
  Rng rng(3);
  const WeightMatrix w = consensus_weights(build_complete(6));
  const Eigen::VectorXd x0 = rng.gaussian_vector(6);
  const ConsensusResult result = run(x0, w, 1e-9, 100);
  CHECK(std::abs(result.average - x0.mean()) < 1e-12);
  CHECK(result.iterations <= 2);
  CHECK((result.final_values.array() - x0.mean()).abs().maxCoeff() < 1e-9);
}

TEST_CASE("run: already-agreed input takes zero iterations") {
  const WeightMatrix w = consensus_weights(build_complete(5));
  const ConsensusResult result =
      run(Eigen::VectorXd::Constant(5, 1.5), w, 1e-9, 100);
  CHECK(result.iterations == 0);
  CHECK(result.average == doctest::Approx(1.5));
}

TEST_CASE("run: max_iter exhaustion carries the residual spread") {
  const WeightMatrix w = consensus_weights(build_cycle_inverse_chord(31));
  Rng rng(9);
  const Eigen::VectorXd x0 = rng.gaussian_vector(31);
  try {
    run(x0, w, 1e-12, 3);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& err) {
    CHECK(err.residual > 0.0);
  }
}

TEST_CASE("run: iteration growth on the expander family is monotone") {
  // Empirical sweep; the growth rate itself is examined by the acceptance
  // suite, which pins the spec-level claim.
  Rng rng(41);
  int previous = 0;
  for (int size : {31, 61, 127}) {
    const WeightMatrix w = consensus_weights(build_cycle_inverse_chord(size));
    const Eigen::VectorXd x0 = rng.gaussian_vector(size);
    const ConsensusResult result = run(x0, w, 1e-6, 200000);
    CHECK((result.final_values.array() - x0.mean()).abs().maxCoeff() < 1e-6);
    CHECK(result.iterations > previous);
    previous = result.iterations;
  }
}

TEST_CASE("run: trace emits one row per node per iteration") {
  const WeightMatrix w = consensus_weights(build_complete(4));
  Eigen::VectorXd x0(4);
  x0 << 0, 0, 0, 4;
  std::ostringstream trace;
  const ConsensusResult result = run(x0, w, 1e-9, 100, nullptr, &trace);
  int rows = 0;
  std::istringstream in(trace.str());
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4 * (result.iterations + 1));
}

TEST_CASE("chunk: C=1 returns the original values") {
  Eigen::VectorXd values(3);
  values << 1.5, -2.0, 0.25;
  const ChunkPlan plan = chunk(values, 1, 7);
  CHECK(plan.chunk_count == 1);
  CHECK((plan.chunks.row(0).transpose() - values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("chunk: column sums reproduce the originals") {
  // The residual construction is an exact identity in real arithmetic; in
  // doubles the recombination can carry one final rounding at the scale of
  // the largest partial sum, which the bound below accounts for.
  Rng rng(101);
  int bitwise = 0;
  int total_columns = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int size = 2 + rng.uniform_int(10);
    const int chunks = 1 + rng.uniform_int(6);
    const Eigen::VectorXd values = 3.0 * rng.gaussian_vector(size);
    const ChunkPlan plan = chunk(values, chunks, rng.next_u64());
    for (int col = 0; col < size; ++col) {
      double total = 0.0;
      for (int l = 0; l < chunks; ++l) total += plan.chunks(l, col);
      const double scale =
          chunks * std::max(1.0, std::abs(values[col]));
      CHECK(std::abs(total - values[col]) <=
            8.0 * std::numeric_limits<double>::epsilon() * scale);
      bitwise += total == values[col];
      ++total_columns;
    }
  }
  // The refinement pass makes the identity bitwise whenever representable.
  CHECK(bitwise > total_columns * 4 / 5);
}

TEST_CASE("chunk: different seeds differ, same sums") {
  Eigen::VectorXd values(4);
  values << 0.5, 2.5, -3.0, 10.0;
  const ChunkPlan a = chunk(values, 3, 1);
  const ChunkPlan b = chunk(values, 3, 2);
  CHECK((a.chunks - b.chunks).cwiseAbs().maxCoeff() > 0.0);
  CHECK((a.chunks.colwise().sum() - b.chunks.colwise().sum())
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK_THROWS_AS(chunk(values, 0, 1), std::invalid_argument);
}

TEST_CASE("run_chunked: agrees with the unchunked limit") {
  Rng rng(55);
  const WeightMatrix w = consensus_weights(build_cycle_inverse_chord(13));
  const Eigen::VectorXd x0 = rng.gaussian_vector(13);
  const ConsensusResult plain = run(x0, w, 1e-9, 100000);
  const ConsensusResult chunked = run_chunked(x0, w, 3, 1e-9, 100000, 99);
  CHECK(std::abs(plain.average - chunked.average) < 1e-8);
}

TEST_CASE("run_chunked: zero input stays zero") {
  const WeightMatrix w = consensus_weights(build_complete(5));
  for (int chunks : {1, 2, 5}) {
    const ConsensusResult result =
        run_chunked(Eigen::VectorXd::Zero(5), w, chunks, 1e-9, 1000, 4);
    CHECK(std::abs(result.average) < 1e-8);
  }
}

TEST_CASE("run_chunked: first-iteration messages never expose raw values") {
  const WeightMatrix w = consensus_weights(build_complete(5));
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::VectorXd x0 = rng.gaussian_vector(5);
    MessageLog log;
    run_chunked(x0, w, 2, 1e-8, 1000, rng.next_u64(), &log);
    for (const MessageRecord& record : log.records) {
      if (record.iteration != 0) continue;
      CHECK(record.value != x0[record.from]);
    }
  }
}

TEST_CASE("sum conservation over long runs") {
  Rng rng(77);
  const WeightMatrix w = consensus_weights(build_cycle_inverse_chord(11));
  ConsensusVector x{rng.gaussian_vector(11), 0};
  const double initial = x.values.sum();
  for (int t = 0; t < 10000; ++t) x = step(x, w);
  CHECK(std::abs(x.values.sum() - initial) <
        1e-9 * std::max(1.0, std::abs(initial)));
}

TEST_CASE("permutation equivariance of trajectories") {
  Rng rng(31);
  const int size = 9;
  const Graph g = random_connected_graph(size, size, rng);
  const std::vector<int> perm = random_permutation(size, 12345);
  const Graph h = relabel(g, perm);

  Eigen::VectorXd x0 = rng.gaussian_vector(size);
  Eigen::VectorXd y0(size);
  for (int i = 0; i < size; ++i) y0[perm[i]] = x0[i];

  ConsensusVector x{x0, 0};
  ConsensusVector y{y0, 0};
  const WeightMatrix wg = consensus_weights(g);
  const WeightMatrix wh = consensus_weights(h);
  for (int t = 0; t < 25; ++t) {
    x = step(x, wg);
    y = step(y, wh);
    for (int i = 0; i < size; ++i)
      CHECK(y.values[perm[i]] == doctest::Approx(x.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("monotone contraction of the max deviation from the mean") {
  Rng rng(63);
  const WeightMatrix w = consensus_weights(build_cycle_inverse_chord(17));
  ConsensusVector x{rng.gaussian_vector(17), 0};
  const double mean = x.values.mean();
  double previous = (x.values.array() - mean).abs().maxCoeff();
  for (int t = 0; t < 200; ++t) {
    x = step(x, w);
    const double deviation = (x.values.array() - mean).abs().maxCoeff();
    CHECK(deviation <= previous + 1e-12);
    previous = deviation;
  }
}

TEST_CASE("chunk linearity: chunked consensus limits sum to the plain limit") {
  Rng rng(88);
  for (int trial = 0; trial < 5; ++trial) {
    const int size = 5 + rng.uniform_int(10);
    const Graph g = random_connected_graph(size, 2 * size, rng);
    const WeightMatrix w = consensus_weights(g);
    const Eigen::VectorXd x0 = rng.gaussian_vector(size);
    const double tol = 1e-9;
    const int chunks = 4;
    const ConsensusResult plain = run(x0, w, tol, 200000);
    const ConsensusResult chunked =
        run_chunked(x0, w, chunks, tol, 200000, rng.next_u64());
    CHECK(std::abs(plain.average - chunked.average) <= chunks * tol);
  }
}

TEST_CASE("session: exact mode returns identical mean rows") {
  ConsensusSession session = ConsensusSession::exact(4);
  Eigen::MatrixXd rows(4, 2);
  rows << 1, 10, 2, 20, 3, 30, 4, 40;
  const Eigen::MatrixXd views = session.mean_views(rows);
  CHECK(views.rows() == 4);
  for (int s = 0; s < 4; ++s) {
    CHECK(views(s, 0) == doctest::Approx(2.5));
    CHECK(views(s, 1) == doctest::Approx(25.0));
  }
  CHECK(session.last_iterations() == 0);
}

TEST_CASE("session: network mode matches exact sums") {
  Rng rng(19);
  const Graph g = build_cycle_inverse_chord(7);
  const WeightMatrix w = consensus_weights(g);
  ConsensusSession::Options options;
  options.tol = 1e-10;
  options.max_iter = 100000;
  const Eigen::MatrixXd rows = rng.gaussian_matrix(7, 5);

  for (int chunks : {1, 3}) {
    options.chunks = chunks;
    options.seed = 42 + chunks;
    ConsensusSession session = ConsensusSession::network(w, options);
    const Eigen::MatrixXd sums = session.sum_views(rows);
    const Eigen::VectorXd truth = rows.colwise().sum();
    for (int s = 0; s < 7; ++s)
      CHECK((sums.row(s).transpose() - truth).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(session.last_iterations() > 0);
  }
}

TEST_CASE("session: identical rows converge without iterating") {
  const WeightMatrix w = consensus_weights(build_complete(5));
  ConsensusSession session =
      ConsensusSession::network(w, ConsensusSession::Options{});
  const Eigen::MatrixXd rows = Eigen::MatrixXd::Constant(5, 3, 2.0);
  const Eigen::MatrixXd sums = session.sum_views(rows);
  CHECK((sums.array() - 10.0).abs().maxCoeff() == 0.0);
  CHECK(session.last_iterations() == 0);
}
