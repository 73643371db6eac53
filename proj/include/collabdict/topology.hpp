#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace collabdict::topology {

/// Undirected P2P communication graph over the network participants.
///
/// The adjacency matrix is binary, symmetric, with a zero diagonal. Graphs
/// produced by the builders below are additionally connected with minimum
/// degree >= 1; hand-built graphs (e.g. disconnected fixtures) only need the
/// structural invariants.
struct Graph {
  Eigen::MatrixXd adjacency;

  int size() const { return static_cast<int>(adjacency.rows()); }
  int degree(int v) const { return static_cast<int>(adjacency.row(v).sum()); }
};

/// Consensus iteration matrix W = I - L/S with L = D - A the graph Laplacian.
/// Symmetric and doubly stochastic by construction.
struct WeightMatrix {
  Eigen::MatrixXd entries;

  int size() const { return static_cast<int>(entries.rows()); }
};

struct SpectralReport {
  Eigen::VectorXd eigenvalues;  // ascending
  double gap;                   // 1 - max |non-principal eigenvalue|
  bool contraction_ok;
};

/// Validates the structural invariants and wraps the adjacency matrix.
Graph make_graph(Eigen::MatrixXd adjacency);

/// Cycle 0-1-...-(S-1)-0 on the residues mod S plus a chord from each x to its
/// modular inverse. S must be a prime > 2. Node 0 and self-inverse residues
/// keep only their cycle edges, so the graph is 3-regular except at a handful
/// of degree-2 nodes; no self-loops or multi-edges arise.
Graph build_cycle_inverse_chord(int size);

/// Complete graph on `size` > 2 nodes.
Graph build_complete(int size);

bool is_connected(const Graph& g);

/// Relabels node v as perm[v].
Graph relabel(const Graph& g, const std::vector<int>& perm);

/// Seeded Fisher-Yates permutation of 0..n-1, used to randomize node labels
/// between aggregation sessions.
std::vector<int> random_permutation(int n, std::uint64_t seed);

WeightMatrix consensus_weights(const Graph& g);

/// Full symmetric eigendecomposition of W. contraction_ok is true when the
/// second-largest absolute eigenvalue is strictly below 1 - 1e-10, which for
/// these matrices is equivalent to the graph being connected.
SpectralReport spectral_gap(const WeightMatrix& w);

/// Edge-list text format: first line S, then one `u v` pair per line,
/// 0-indexed, each undirected edge listed once.
void save_edge_list(const Graph& g, std::ostream& out);
Graph load_edge_list(std::istream& in);

bool is_prime(int n);

}  // namespace collabdict::topology
