#include "collabdict/topology.hpp"

#include "collabdict/common.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace collabdict::topology {

namespace {

constexpr double kContractionMargin = 1e-10;

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t mod) {
  std::uint64_t result = 1;
  base %= mod;
  while (exp > 0) {
    if (exp & 1) result = result * base % mod;
    base = base * base % mod;
    exp >>= 1;
  }
  return result;
}

}  // namespace

bool is_prime(int n) {
  if (n < 2) return false;
  for (int d = 2; static_cast<long long>(d) * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

Graph make_graph(Eigen::MatrixXd adjacency) {
  require(adjacency.rows() == adjacency.cols(), "adjacency must be square");
  require(adjacency.rows() > 2, "graph needs more than 2 participants");
  const Eigen::Index s = adjacency.rows();
  for (Eigen::Index i = 0; i < s; ++i) {
    require(adjacency(i, i) == 0.0, "adjacency diagonal must be zero");
    for (Eigen::Index j = 0; j < s; ++j) {
      const double a = adjacency(i, j);
      require(a == 0.0 || a == 1.0, "adjacency entries must be 0 or 1");
      require(a == adjacency(j, i), "adjacency must be symmetric");
    }
  }
  return Graph{std::move(adjacency)};
}

Graph build_cycle_inverse_chord(int size) {
  require(size > 2, "cycle with inverse chord needs size > 2");
  require(is_prime(size), "cycle with inverse chord needs a prime size");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
  for (int x = 0; x < size; ++x) {
    const int next = (x + 1) % size;
    a(x, next) = 1.0;
    a(next, x) = 1.0;
  }
  for (int x = 1; x < size; ++x) {
    const int inv = static_cast<int>(pow_mod(x, size - 2, size));
    if (inv != x) {
      a(x, inv) = 1.0;
      a(inv, x) = 1.0;
    }
  }
  return Graph{std::move(a)};
}

Graph build_complete(int size) {
  require(size > 2, "complete graph needs size > 2");
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(size, size);
  a.diagonal().setZero();
  return Graph{std::move(a)};
}

bool is_connected(const Graph& g) {
  const int s = g.size();
  if (s == 0) return false;
  std::vector<char> seen(s, 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int reached = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int u = 0; u < s; ++u) {
      if (g.adjacency(v, u) != 0.0 && !seen[u]) {
        seen[u] = 1;
        ++reached;
        queue.push_back(u);
      }
    }
  }
  return reached == s;
}

Graph relabel(const Graph& g, const std::vector<int>& perm) {
  const int s = g.size();
  require(static_cast<int>(perm.size()) == s, "permutation size mismatch");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      a(perm[i], perm[j]) = g.adjacency(i, j);
  return make_graph(std::move(a));
}

std::vector<int> random_permutation(int n, std::uint64_t seed) {
  Rng rng(seed);
  return rng.permutation(n);
}

WeightMatrix consensus_weights(const Graph& g) {
  const int s = g.size();
  const Eigen::VectorXd degrees = g.adjacency.rowwise().sum();
  Eigen::MatrixXd laplacian = -g.adjacency;
  laplacian.diagonal() += degrees;
  Eigen::MatrixXd w =
      Eigen::MatrixXd::Identity(s, s) - laplacian / static_cast<double>(s);
  return WeightMatrix{std::move(w)};
}

SpectralReport spectral_gap(const WeightMatrix& w) {
  const double asym = (w.entries - w.entries.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12)
    throw std::invalid_argument("weight matrix must be symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w.entries);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigendecomposition failed");
  Eigen::VectorXd eigenvalues = solver.eigenvalues();  // ascending

  // Drop one instance of the principal eigenvalue (the one closest to 1,
  // carried by the all-ones vector) and take the largest remaining magnitude.
  Eigen::Index principal = 0;
  (eigenvalues.array() - 1.0).abs().minCoeff(&principal);
  double second = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    if (i == principal) continue;
    second = std::max(second, std::abs(eigenvalues[i]));
  }
  SpectralReport report;
  report.eigenvalues = std::move(eigenvalues);
  report.gap = 1.0 - second;
  report.contraction_ok = second < 1.0 - kContractionMargin;
  return report;
}

void save_edge_list(const Graph& g, std::ostream& out) {
  const int s = g.size();
  out << s << '\n';
  for (int u = 0; u < s; ++u)
    for (int v = u + 1; v < s; ++v)
      if (g.adjacency(u, v) != 0.0) out << u << ' ' << v << '\n';
}

Graph load_edge_list(std::istream& in) {
  int s = 0;
  if (!(in >> s)) throw std::invalid_argument("edge list: missing size line");
  require(s > 2, "edge list: size must exceed 2");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(s, s);
  int u = 0;
  int v = 0;
  while (in >> u >> v) {
    require(u >= 0 && u < s && v >= 0 && v < s, "edge list: node out of range");
    require(u != v, "edge list: self-loop");
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return make_graph(std::move(a));
}

}  // namespace collabdict::topology
