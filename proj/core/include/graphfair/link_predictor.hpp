#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphfair/fairness.hpp"
#include "graphfair/graph.hpp"

namespace graphfair {

// One-layer GCN encoder weights for link prediction.
struct GcnParams {
  Matrix weight;  // F x d
  std::string init_scheme = "glorot";
  std::uint64_t seed = 0;

  static GcnParams init(std::size_t in_dim, std::size_t hidden_dim, std::uint64_t seed);
};

struct TrainConfig {
  double lambda = 0.0;         // fairness weight; 0 = plain cross-entropy
  double learning_rate = 1e-2;
  int epochs = 300;
  int batch_size = 128;
  int hidden_dim = 16;
  double negative_ratio = 1.0;  // presampled negatives per training positive
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;

  // auc_then_dsp: lowest validation delta_sp among epochs whose validation
  // AUC is within the tolerance of the best seen (the fairness-aware
  // protocol). best_auc: plain argmax validation AUC.
  enum class Selection { auc_then_dsp, best_auc };
  Selection selection = Selection::auc_then_dsp;
  double selection_auc_tolerance = 0.005;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0, ce = 0.0, reg = 0.0;
  double val_auc = 0.0, val_dsp = 0.0;
};
using TrainHistory = std::vector<EpochStats>;

std::string history_to_csv(const TrainHistory& h);

// D^-1/2 (A + I) D^-1/2 over the given message edges.
Matrix normalized_adjacency(int n_nodes, const std::vector<Edge>& message_edges);

// H = relu(Ahat X W). Message passing runs over message_edges only
// (training positives under the evaluation protocol).
Matrix encode(const Graph& g, const std::vector<Edge>& message_edges, const GcnParams& params);

// Inner-product decoder. The raw score is the bilinear form with identity
// decoder matrix; the probability is its sigmoid.
double inner_score(const Matrix& embeddings, int i, int j);
double decode(const Matrix& embeddings, int i, int j);

// Full symmetric probability matrix (zero diagonal).
EdgeProbMatrix decode_all(const Matrix& embeddings);

struct TrainResult {
  GcnParams params;      // weights at the best-validation-AUC epoch
  TrainHistory history;
  int best_epoch = 0;
};

struct LpLossParts {
  ad::Tensor total, ce, reg;
};

// One training-step loss: mean cross-entropy over the sampled pairs
// (pi, pj, labels) plus lambda times the batch-ratio regularizer over the
// full pairwise block of `batch`. Exposed so gradients can be checked
// against finite differences directly.
LpLossParts lp_batch_loss(ad::Tape& tape, ad::Tensor embeddings,
                          const std::vector<std::size_t>& pi, const std::vector<std::size_t>& pj,
                          const Matrix& labels, const std::vector<int>& batch,
                          const SensitivePartition& partition, double lambda);

TrainResult train_lp(const Graph& g, const EdgeSplit& split, const TrainConfig& config);

// Probability that a random positive outscores a random negative, ties half.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Measured bound inputs: L = 1 (ReLU), delta and Delta_z from c = X W and
// z = prob c, q from the embeddings, identity decoder norm 1.
BoundParams bound_params_from_model(const GcnParams& params, const Graph& g,
                                    const EdgeProbMatrix& prob, const Matrix& embeddings);

// Full fairness report for a trained model: metrics over the decoded
// probability matrix, measured bound values and assumption checks. When a
// split is given, delta_eo conditions on the test edges and the test-pair
// delta_sp restriction is reported as well.
FairnessReport model_report(const GcnParams& params, const Graph& g, const Matrix& embeddings,
                            const EdgeSplit* split);

// AUC on the test positives/negatives plus the full report. Embeddings use
// the train adjacency.
FairnessReport evaluate_lp(const GcnParams& params, const Graph& g, const EdgeSplit& split);

}  // namespace graphfair
