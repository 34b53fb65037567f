#pragma once

#include <optional>
#include <string>
#include <vector>

#include "graphfair/graph.hpp"
#include "graphfair/tensor.hpp"

namespace graphfair {

// Inputs to the disparity bounds. Everything here is measurable from a model
// and a probability matrix, which keeps the bound checks self-contained.
struct BoundParams {
  double lipschitz = 1.0;     // L of the activation
  double feature_bound = 1.0; // delta: inf-norm bound on the c vectors
  double deviation = 0.0;     // Delta_z: max inf-norm deviation of z from the mean
  double embed_norm = 1.0;    // q: max 2-norm of an embedding
  double decoder_norm = 1.0;  // spectral norm of the decoder bilinear form
  int hidden_dim = 1;         // F: dimension of the bounded representation

  void validate() const;
};

struct AssumptionCheck {
  bool a1 = false, a2 = false, a3 = false;
  double a1_max_norm = 0.0;   // max_i ||c_i||_inf
  double a1_bound = 0.0;      // delta it was checked against
  int a2_worst_node = -1;
  double a2_margin = 0.0;     // min_i intra_deg/|S_k| - inter_deg/(N-|S_k|)
  int a3_worst_node = -1;
  double a3_margin = 0.0;     // total mass - factor * max inter degree
  double a3_factor = 10.0;
};

struct FairnessReport {
  double delta_sp = 0.0;
  double delta_eo = 0.0;
  std::vector<double> alpha1, alpha2;        // per group
  std::vector<double> theorem1_bounds;       // per group
  double prop1_bound = 0.0;
  double corollary_bound = 0.0;
  AssumptionCheck assumptions;
  // optional extras reported by the evaluators
  std::optional<double> auc;
  std::optional<double> delta_sp_test_pairs;
  std::optional<double> score_gap;  // pre-sigmoid bilinear group gap
};

std::string report_to_kv(const FairnessReport& r);
std::string report_csv_header(int n_groups);
std::string report_to_csv_row(const FairnessReport& r);

// --- metrics ---------------------------------------------------------------

// Statistical parity gap: |mean prob over same-group ordered pairs - mean
// prob over cross-group ordered pairs| (i != j throughout).
double delta_sp(const EdgeProbMatrix& prob, const SensitivePartition& partition);

// Equal-opportunity gap: the same conditioned on true edges of `truth`.
double delta_eo(const EdgeProbMatrix& prob, const Graph& truth,
                const SensitivePartition& partition);
double delta_eo(const EdgeProbMatrix& prob, const std::vector<Edge>& true_edges,
                const SensitivePartition& partition);

// Statistical parity restricted to a given pair set (e.g. test pairs).
double delta_sp_on_pairs(const EdgeProbMatrix& prob, const SensitivePartition& partition,
                         const std::vector<Edge>& pairs);

// --- optimal structure -------------------------------------------------------

struct OptimalTargets {
  std::vector<double> intra;  // per group
  std::vector<double> inter;
};

// Per-group edge-mass targets that zero both disparity factors for a given
// total mass: intra_k = E*|S_k|^2/N^2, inter_k = E*(N|S_k|-|S_k|^2)/N^2.
OptimalTargets optimal_targets(double total_mass, const SensitivePartition& partition);

struct AlphaTerms {
  std::vector<double> alpha1, alpha2;
};

// The two topology factors that drive the representation-disparity bound;
// both vanish exactly at the optimal targets.
AlphaTerms alpha_terms(const GroupEdgeMass& mass, const SensitivePartition& partition);

// --- regularizers ------------------------------------------------------------

// Full-graph regularizer: sum_k |intra_k - intra*_k| + |inter_k - inter*_k|,
// with targets computed from the reference mass e_ref.
double mass_target_regularizer(const EdgeProbMatrix& prob, const SensitivePartition& partition,
                               double e_ref);
ad::Tensor mass_target_regularizer(ad::Tape& tape, ad::Tensor prob,
                                   const SensitivePartition& partition, double e_ref);

// Batch regularizer: sum_k |intra-batch intra mass / |S_k| -
// intra-batch inter mass / (N - |S_k|)|, with global group sizes in the
// denominators. Zero exactly at the |S_k| : (N-|S_k|) mass ratio.
double batch_ratio_regularizer(const EdgeProbMatrix& prob, const SensitivePartition& partition,
                               const std::vector<int>& batch);
ad::Tensor batch_ratio_regularizer(ad::Tape& tape, ad::Tensor prob,
                                   const SensitivePartition& partition,
                                   const std::vector<int>& batch);

// Same loss on a dense |B| x |B| probability block indexed by block_nodes.
// This is what the trainers use; it avoids materializing an N x N matrix.
ad::Tensor batch_ratio_regularizer_block(ad::Tape& tape, ad::Tensor prob_block,
                                         const std::vector<int>& block_nodes,
                                         const SensitivePartition& partition);

// Same loss from an M x 1 vector of probabilities for unordered pairs
// (u < v). Ordered-pair masses are recovered through the pair weights:
// 2 per intra pair, 1 per endpoint group for inter pairs.
ad::Tensor batch_ratio_regularizer_pairs(ad::Tape& tape, ad::Tensor pair_probs,
                                         const std::vector<Edge>& pairs,
                                         const SensitivePartition& partition);

// --- bounds ------------------------------------------------------------------

// Per-group bound L * (delta * sqrt(F) * (alpha1 + alpha2) + 2 sqrt(N) Delta_z).
std::vector<double> theorem1_bound(const GroupEdgeMass& mass, const BoundParams& params,
                                   const SensitivePartition& partition);

// sum_k (|S_k|/N) * q * decoder_norm * delta_k_max.
double prop1_bound(const std::vector<double>& delta_k_max, const BoundParams& params,
                   const SensitivePartition& partition);

// The combination of both: prop1 applied to the theorem-1 group bounds.
double corollary_bound(const GroupEdgeMass& mass, const BoundParams& params,
                       const SensitivePartition& partition);

// Expected single-layer ReLU aggregation over a stochastic adjacency:
// h_i = relu(sum_j prob_ij c_j). The quantity the theorem-1 check bounds.
Matrix expected_relu_aggregation(const EdgeProbMatrix& prob, const Matrix& c);

// Per-group disparity ||mean_{i in S_k} h_i - mean_{i not in S_k} h_i||_2.
std::vector<double> group_mean_disparities(const Matrix& h, const SensitivePartition& partition);

// Measured bound inputs for a raw aggregation check: L = 1 (ReLU),
// delta = max ||c_i||_inf, Delta_z = max ||z_i - mean z||_inf, F = c cols.
BoundParams bound_params_for_aggregation(const EdgeProbMatrix& prob, const Matrix& c);

// |sum_k (|S_k|/N) (p_k^T p_k - p_k^T q_k)| with p_k / q_k the group and
// complement mean embeddings: the pre-sigmoid score gap the proposition-1
// bound dominates (identity decoder).
double bilinear_score_gap(const Matrix& embeddings, const SensitivePartition& partition);

// A1: max ||c_i||_inf <= delta. A2: per node, expected intra degree / |S_k| >=
// expected inter degree / (N - |S_k|). A3: total mass >= factor * max expected
// inter degree.
AssumptionCheck check_assumptions(const EdgeProbMatrix& prob, const SensitivePartition& partition,
                                  const Matrix& c_vectors, double delta, double a3_factor = 10.0);

}  // namespace graphfair
