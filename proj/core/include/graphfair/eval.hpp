#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "graphfair/diffusion.hpp"
#include "graphfair/graph.hpp"
#include "graphfair/link_predictor.hpp"

namespace graphfair::eval {

// Exact 1-Wasserstein distance between two empirical distributions (equal
// mass per sample), computed by integrating |F1 - F2| over the value axis.
double wasserstein1(std::vector<double> a, std::vector<double> b);

double degree_wasserstein(const Graph& g1, const Graph& g2);

// Local clustering coefficient per node; nodes of degree < 2 get 0.
std::vector<double> local_clustering(const Graph& g);

double clustering_wasserstein(const Graph& g1, const Graph& g2);

struct EdgeTagRecord {
  int u = 0, v = 0;
  bool intra = false;
};

struct IntraInterListing {
  std::vector<EdgeTagRecord> records;  // one per undirected edge
  long intra_count = 0, inter_count = 0;
  std::vector<long> group_intra;       // undirected intra edges inside group k
  std::vector<long> group_inter;       // undirected inter edges touching group k
  std::vector<double> target_ratio;    // |S_k| / (N - |S_k|)
  std::vector<double> observed_ratio;  // ordered intra mass / ordered inter mass
};

IntraInterListing intra_inter_listing(const Graph& g, const SensitivePartition& partition);
std::string listing_to_csv(const IntraInterListing& l);
std::string listing_summary(const IntraInterListing& l);

struct GraphEvalRow {
  std::string name;  // "real" or "synthetic_<i>"
  double auc = 0.0, delta_sp = 0.0, delta_eo = 0.0;
  double degree_w1 = 0.0, clustering_w1 = 0.0;  // distance to the real graph
  long intra_edges = 0, inter_edges = 0;
};

struct GenerationReport {
  std::vector<GraphEvalRow> rows;  // rows[0] is the real graph
  double syn_mean_auc = 0.0, syn_std_auc = 0.0;
  double syn_mean_dsp = 0.0, syn_std_dsp = 0.0;
  double syn_mean_deo = 0.0, syn_std_deo = 0.0;
  double syn_mean_degree_w1 = 0.0, syn_mean_clustering_w1 = 0.0;
  bool amplification = false;  // mean synthetic delta_sp >= real delta_sp
};

std::string generation_report_to_csv(const GenerationReport& r);
std::string generation_report_summary(const GenerationReport& r);

using GraphSampler = std::function<Graph(int sample_index)>;

struct StudyConfig {
  int n_samples = 10;
  TrainConfig lp;               // lp.seed + row index seeds each training run
  std::uint64_t sample_seed = 0;  // + row index seeds each generator draw
  double train_frac = 0.8;      // split used to train on each synthetic graph
  int jobs = 1;
};

// Table-style protocol: a link predictor is trained on the real graph and on
// each sampled graph (index-aligned, same node count), and every model is
// evaluated against the real test split with the real sensitive labels.
GenerationReport bias_amplification_study(const Graph& real, const EdgeSplit& split,
                                          const GraphSampler& sampler, const StudyConfig& config);

// Convenience wrapper: samples from a trained denoiser, holding the sensitive
// assignment fixed to the real labels so node indices stay comparable.
GenerationReport bias_amplification_study(const Graph& real, const EdgeSplit& split,
                                          const diffusion::DenoiserParams& generator,
                                          const StudyConfig& config);

}  // namespace graphfair::eval
