#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphfair/matrix.hpp"

namespace graphfair {

// Undirected edge in canonical form (u < v).
struct Edge {
  int u = 0, v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// Attributed graph with one categorical sensitive attribute per node.
// Adjacency is kept as a sorted list of canonical undirected edges; the
// diagonal (self loops) is excluded everywhere.
struct Graph {
  int n_nodes = 0;
  std::vector<Edge> edges;     // sorted, unique, u < v
  Matrix features;             // n_nodes x F
  std::vector<int> sensitive;  // group id in {0..n_groups-1} per node
  int n_groups = 0;
  bool synthetic_sensitive = false;

  std::size_t feature_dim() const { return features.cols(); }

  // Throws ValidationError when any structural invariant is broken.
  void validate() const;

  void canonicalize();             // sort + dedupe edges
  bool has_edge(int a, int b) const;  // binary search over canonical edges

  std::vector<int> degrees() const;
  std::vector<std::vector<int>> neighbor_lists() const;
  Matrix adjacency() const;  // dense symmetric 0/1, zero diagonal
};

// One-hot view of the sensitive attribute with per-group bookkeeping.
struct SensitivePartition {
  int n_nodes = 0;
  int n_groups = 0;
  std::vector<int> labels;
  Matrix onehot;                               // N x K
  std::vector<int> group_sizes;                // length K
  std::vector<std::vector<int>> group_members; // K lists

  static SensitivePartition from_labels(const std::vector<int>& labels, int n_groups);
  static SensitivePartition from_graph(const Graph& g);
};

// Train/val/test positives plus sampled negatives for the held-out sets.
struct EdgeSplit {
  std::vector<Edge> train_pos, val_pos, test_pos;
  std::vector<Edge> val_neg, test_neg;
  std::uint64_t seed = 0;
};

// Symmetric matrix of edge probabilities with zero diagonal. The object all
// fairness metrics, bounds and regularizers consume.
struct EdgeProbMatrix {
  Matrix p;

  std::size_t n() const { return p.rows(); }

  // Validates symmetry and the [0,1] range; forces the diagonal to zero.
  static EdgeProbMatrix from_matrix(Matrix m);
  static EdgeProbMatrix from_graph(const Graph& g);
};

// Expected edge-probability mass per group, over ordered pairs (i,j), i != j.
// A symmetric matrix therefore counts each undirected pair twice; ratios are
// convention-independent.
struct GroupEdgeMass {
  std::vector<double> intra;  // per group: sum over ordered intra pairs
  std::vector<double> inter;  // per group: sum over ordered pairs leaving the group
  double total = 0.0;         // sum over all ordered pairs
};

struct LoadStats {
  int self_loops_dropped = 0;
  int duplicates_dropped = 0;
};

// Reads the three-file dataset layout: an edge list ("u v" per line), a dense
// CSV feature matrix (row i = node i) and a sensitive-label file (one integer
// per line). Group count is inferred as max label + 1 and every group must be
// populated.
Graph load_graph(const std::string& edge_file, const std::string& feature_file,
                 const std::string& sensitive_file, LoadStats* stats = nullptr);

// Stochastic block model with group-mean-shifted Gaussian features.
Graph sbm_generate(const std::vector<int>& group_sizes, double intra_p, double inter_p,
                   int feature_dim, std::uint64_t seed);

// 80/10/10-style split: round(train_frac * M) training positives, the rest
// divided equally between validation and test (validation takes the odd one).
// Negatives are drawn uniformly without replacement from the non-edges.
EdgeSplit split_edges(const Graph& g, double train_frac, std::uint64_t seed);

GroupEdgeMass group_edge_mass(const EdgeProbMatrix& prob, const SensitivePartition& partition);

// Single-container text serialization (documented in the README).
void save_graph(const Graph& g, const std::string& path);
Graph load_graph_container(const std::string& path);
std::string graph_to_string(const Graph& g);

void save_split(const EdgeSplit& s, const std::string& path);
EdgeSplit load_split(const std::string& path);

Matrix adjacency_from_edges(int n_nodes, const std::vector<Edge>& edges);
std::vector<std::vector<int>> neighbor_lists_from_edges(int n_nodes,
                                                        const std::vector<Edge>& edges);

}  // namespace graphfair
