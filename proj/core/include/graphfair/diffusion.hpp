#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "graphfair/fairness.hpp"
#include "graphfair/graph.hpp"
#include "graphfair/tensor.hpp"

namespace graphfair::diffusion {

// Cosine-scheduled noise levels. alpha_bar(t) is the exact running product of
// the per-step alpha(t), so kernel composition identities hold to rounding.
struct NoiseSchedule {
  int steps = 0;         // T
  double offset = 0.008; // s
  std::vector<double> alpha;      // alpha[t] for t = 1..T; alpha[0] = 1 unused
  std::vector<double> alpha_bar;  // alpha_bar[t] for t = 0..T; [0] = 1

  double alpha_at(int t) const { return alpha.at(t); }
  double alpha_bar_at(int t) const { return alpha_bar.at(t); }
};

// Raw cos(0.5*pi*(t/T+s)/(1+s))^2 before normalization by the t=0 value.
double cosine_alpha_bar_raw(int t, int steps, double offset);

NoiseSchedule build_schedule(int steps, double offset = 0.008);

// 2-state row-stochastic transition kernel alpha*I + (1-alpha)*1*m^T.
struct TransitionKernel {
  std::array<std::array<double, 2>, 2> q{};

  static TransitionKernel uniform_mix(double alpha, const std::array<double, 2>& marginal);
  TransitionKernel compose(const TransitionKernel& next) const;  // this * next
};

// Empirical label distributions of the clean graph: edge marginal over
// ordered off-diagonal pairs, per-feature Bernoulli rates.
struct ChannelMarginals {
  std::array<double, 2> edge{0.5, 0.5};                 // (absent, present)
  std::vector<std::array<double, 2>> feature;           // per column
};

// Binary view of a feature matrix: identity for 0/1 input, otherwise a
// per-column mean threshold.
Matrix binarize_features(const Matrix& x);

ChannelMarginals marginals(const Graph& g);
ChannelMarginals marginals(const Matrix& adjacency, const Matrix& binary_features);

struct NoisyGraph {
  int t = 0;
  Matrix adjacency;  // N x N symmetric 0/1, zero diagonal
  Matrix features;   // N x F binary
  std::vector<std::vector<int>> neighbors;  // of the noisy adjacency
};

// Draws q(. | clean) = clean row of alpha_bar(t)*I + (1-alpha_bar(t))*1*m^T per
// channel; only the i<j entries are sampled and mirrored.
NoisyGraph forward_noise(const Matrix& clean_adj, const Matrix& clean_features, int t,
                         const NoiseSchedule& schedule, const ChannelMarginals& m,
                         std::mt19937_64& rng);
NoisyGraph forward_noise(const Graph& clean, int t, const NoiseSchedule& schedule,
                         const ChannelMarginals& m, std::mt19937_64& rng);

// Sensitive-attribute-guided MPNN denoiser.
struct DenoiserSizes {
  int layers = 2;
  int hidden = 24;       // node channel width
  int s_hidden = 8;      // sensitive channel width after the first layer
  int time_hidden = 8;
  int edge_hidden = 32;  // edge head MLP width
  int feature_dim = 0;   // F, set from the data
  int n_groups = 0;      // K, set from the data

  int final_dim() const;  // width of the concatenated representation
  void validate() const;
};

struct DenoiserParams {
  DenoiserSizes sizes;

  // input embedders (linear-relu-linear)
  Matrix x_w1, x_b1, x_w2, x_b2;  // F -> hidden -> hidden
  Matrix t_w1, t_b1, t_w2, t_b2;  // 1 -> time_hidden -> time_hidden

  // message passing, one entry per layer
  std::vector<Matrix> w_time;  // time_hidden x hidden
  std::vector<Matrix> w_hs;    // (hidden + s_dim(l)) x hidden
  std::vector<Matrix> w_ss;    // s_dim(l) x s_dim(l+1)
  std::vector<Matrix> b_h;     // 1 x hidden
  std::vector<Matrix> b_s;     // 1 x s_dim(l+1)

  // output heads
  Matrix feat_w, feat_b;                    // final_dim -> F
  Matrix edge_w1, edge_b1, edge_w2, edge_b2;  // final_dim -> edge_hidden -> 1

  // sampling metadata captured at training time
  NoiseSchedule schedule;
  ChannelMarginals channel_marginals;
  std::vector<double> group_distribution;

  static DenoiserParams init(DenoiserSizes sizes, std::uint64_t seed);
  std::vector<std::pair<std::string, Matrix*>> named_parameters();
  std::vector<std::pair<std::string, const Matrix*>> named_parameters() const;
  void validate() const;
};

// Registers the denoiser weights on a tape and exposes the forward pieces.
// Shared by training (trainable=true) and inference (constants).
class DenoiserTapeModel {
 public:
  DenoiserTapeModel(ad::Tape& tape, const DenoiserParams& params, bool trainable);

  // N x final_dim representation of every node; aggregation runs over the
  // noisy adjacency and the (fixed) sensitive one-hot channel.
  ad::Tensor node_representations(const NoisyGraph& noisy, const Matrix& sensitive_onehot, int t);

  ad::Tensor feature_logits(ad::Tensor node_repr_rows);
  ad::Tensor edge_logits(ad::Tensor node_repr, const std::vector<std::size_t>& i,
                         const std::vector<std::size_t>& j);

  // aligned with params.named_parameters()
  const std::vector<ad::Tensor>& parameter_tensors() const { return tensors_; }

 private:
  ad::Tape& tape_;
  const DenoiserParams& p_;
  std::vector<ad::Tensor> tensors_;
  ad::Tensor at(std::size_t idx) const { return tensors_[idx]; }
};

struct DenoisePrediction {
  Matrix feature_probs;     // N x F
  EdgeProbMatrix edge_probs;  // symmetric, zero diagonal
};

// Full-graph prediction of the clean labels from a noisy input.
DenoisePrediction denoise(const NoisyGraph& noisy, const SensitivePartition& sensitive, int t,
                          const DenoiserParams& params);

struct DiffusionTrainConfig {
  double lambda = 0.0;
  int epochs = 600;  // optimizer steps
  double learning_rate = 1e-2;
  int batch_size = 128;
  std::uint64_t seed = 0;
  int steps = 3;            // T
  double schedule_offset = 0.008;
  double feature_loss_weight = 1.0;  // scales the feature CE term
  DenoiserSizes sizes;      // feature_dim / n_groups are filled from the graph

  void validate() const;
};

struct DiffusionLossParts {
  ad::Tensor total, feature_ce, edge_ce, regularizer;
};

// One training-step loss over a node batch: feature CE on the batch rows,
// edge CE over the ordered batch pairs, lambda * batch-ratio regularizer on
// the predicted probabilities. Exposed so gradients can be checked directly.
DiffusionLossParts diffusion_batch_loss(ad::Tape& tape, DenoiserTapeModel& model,
                                        const NoisyGraph& noisy, const Matrix& clean_adj,
                                        const Matrix& clean_features,
                                        const SensitivePartition& partition,
                                        const std::vector<int>& batch, int t, double lambda,
                                        double feature_weight = 1.0);

struct DiffusionTrainStats {
  int step = 0;
  int t = 0;
  double loss = 0.0, feature_ce = 0.0, edge_ce = 0.0, regularizer = 0.0;
};

struct DiffusionTrainResult {
  DenoiserParams params;
  std::vector<DiffusionTrainStats> history;
};

DiffusionTrainResult train_diffusion(const Graph& g, const DiffusionTrainConfig& config);

// Closed-form Bayes posterior over the previous label of one channel:
// p(x_{t-1}) = sum_e pred[e] * q(x_{t-1} | x_0 = e, x_t), with terms dropped
// when q(x_t | x_0 = e) = 0. Falls back to the marginal when every term
// drops; fell_back reports that.
std::array<double, 2> posterior(const std::array<double, 2>& predicted, int x_t, int t,
                                const NoiseSchedule& schedule, const std::array<double, 2>& marginal,
                                bool* fell_back = nullptr);

// Ancestral sampling t = T..1. Sensitive attributes are drawn once from
// group_distribution (redrawn while any group is empty) and held fixed.
Graph sample_graph(const DenoiserParams& params, int n_nodes,
                   const std::vector<double>& group_distribution, std::mt19937_64& rng);

// Same chain with a caller-supplied sensitive assignment (index-aligned
// studies use the real labels).
Graph sample_graph_with_sensitive(const DenoiserParams& params, const std::vector<int>& sensitive,
                                  int n_groups, std::mt19937_64& rng);

std::vector<int> sample_sensitive(const std::vector<double>& group_distribution, int n_nodes,
                                  std::mt19937_64& rng);

}  // namespace graphfair::diffusion
