#include "graphfair/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "graphfair/text_io.hpp"

namespace graphfair::eval {

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double dist = 0.0, prev = std::min(a[0], b[0]);
  while (ia < a.size() || ib < b.size()) {
    const double va = ia < a.size() ? a[ia] : std::numeric_limits<double>::infinity();
    const double vb = ib < b.size() ? b[ib] : std::numeric_limits<double>::infinity();
    const double v = std::min(va, vb);
    dist += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (v - prev);
    while (ia < a.size() && a[ia] == v) ++ia;
    while (ib < b.size() && b[ib] == v) ++ib;
    prev = v;
  }
  return dist;
}

double degree_wasserstein(const Graph& g1, const Graph& g2) {
  const auto d1 = g1.degrees();
  const auto d2 = g2.degrees();
  return wasserstein1(std::vector<double>(d1.begin(), d1.end()),
                      std::vector<double>(d2.begin(), d2.end()));
}

std::vector<double> local_clustering(const Graph& g) {
  const auto nb = g.neighbor_lists();
  std::vector<double> c(g.n_nodes, 0.0);
  for (int i = 0; i < g.n_nodes; ++i) {
    const auto& ni = nb[i];
    const std::size_t d = ni.size();
    if (d < 2) continue;
    long links = 0;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a + 1; b < d; ++b)
        if (g.has_edge(ni[a], ni[b])) ++links;
    c[i] = 2.0 * static_cast<double>(links) / (static_cast<double>(d) * static_cast<double>(d - 1));
  }
  return c;
}

double clustering_wasserstein(const Graph& g1, const Graph& g2) {
  return wasserstein1(local_clustering(g1), local_clustering(g2));
}

// ---------------------------------------------------------------------------
// intra/inter listing

IntraInterListing intra_inter_listing(const Graph& g, const SensitivePartition& partition) {
  if (partition.n_nodes != g.n_nodes)
    throw ValidationError("listing: partition size != graph size");
  IntraInterListing out;
  out.group_intra.assign(partition.n_groups, 0);
  out.group_inter.assign(partition.n_groups, 0);
  for (const Edge& e : g.edges) {
    const bool intra = partition.labels[e.u] == partition.labels[e.v];
    out.records.push_back({e.u, e.v, intra});
    if (intra) {
      ++out.intra_count;
      ++out.group_intra[partition.labels[e.u]];
    } else {
      ++out.inter_count;
      ++out.group_inter[partition.labels[e.u]];
      ++out.group_inter[partition.labels[e.v]];
    }
  }
  out.target_ratio.resize(partition.n_groups);
  out.observed_ratio.resize(partition.n_groups);
  for (int k = 0; k < partition.n_groups; ++k) {
    const double sk = static_cast<double>(partition.group_sizes[k]);
    const double rest = static_cast<double>(partition.n_nodes) - sk;
    out.target_ratio[k] = rest > 0.0 ? sk / rest : std::numeric_limits<double>::infinity();
    // ordered masses: 2x intra count inside k, 1x per inter edge touching k
    const double pw = 2.0 * static_cast<double>(out.group_intra[k]);
    const double px = static_cast<double>(out.group_inter[k]);
    out.observed_ratio[k] = px > 0.0 ? pw / px : std::numeric_limits<double>::infinity();
  }
  return out;
}

std::string listing_to_csv(const IntraInterListing& l) {
  std::ostringstream out;
  out << "u,v,tag\n";
  for (const auto& r : l.records)
    out << r.u << "," << r.v << "," << (r.intra ? "intra" : "inter") << "\n";
  return out.str();
}

std::string listing_summary(const IntraInterListing& l) {
  std::ostringstream out;
  out << "intra_edges " << l.intra_count << "\n";
  out << "inter_edges " << l.inter_count << "\n";
  for (std::size_t k = 0; k < l.group_intra.size(); ++k) {
    out << "group_" << k << "_intra " << l.group_intra[k] << "\n";
    out << "group_" << k << "_inter " << l.group_inter[k] << "\n";
    out << "group_" << k << "_target_ratio " << io::fmt_double(l.target_ratio[k]) << "\n";
    out << "group_" << k << "_observed_ratio " << io::fmt_double(l.observed_ratio[k]) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// bias amplification study

namespace {

struct RowResult {
  GraphEvalRow row;
  std::string error;
};

RowResult evaluate_synthetic(const Graph& real, const EdgeSplit& real_split,
                             const SensitivePartition& real_partition, const Graph& synthetic,
                             int index, const StudyConfig& config) {
  RowResult out;
  out.row.name = "synthetic_" + std::to_string(index);
  if (synthetic.n_nodes != real.n_nodes)
    throw ValidationError("study: synthetic node count != real node count");

  // matched-seed protocol: every row trains with the same LP seed so the
  // row differences come from the graphs, not the training draw
  TrainConfig lp = config.lp;
  const EdgeSplit syn_split = split_edges(synthetic, config.train_frac, lp.seed);
  const TrainResult trained = train_lp(synthetic, syn_split, lp);
  const Matrix h = encode(synthetic, syn_split.train_pos, trained.params);

  std::vector<double> scores;
  std::vector<int> labels;
  for (const Edge& e : real_split.test_pos) {
    scores.push_back(decode(h, e.u, e.v));
    labels.push_back(1);
  }
  for (const Edge& e : real_split.test_neg) {
    scores.push_back(decode(h, e.u, e.v));
    labels.push_back(0);
  }
  out.row.auc = auc(scores, labels);

  const EdgeProbMatrix prob = decode_all(h);
  out.row.delta_sp = delta_sp(prob, real_partition);
  out.row.delta_eo = delta_eo(prob, real_split.test_pos, real_partition);
  out.row.degree_w1 = degree_wasserstein(synthetic, real);
  out.row.clustering_w1 = clustering_wasserstein(synthetic, real);

  const SensitivePartition syn_partition = SensitivePartition::from_graph(synthetic);
  const IntraInterListing listing = intra_inter_listing(synthetic, syn_partition);
  out.row.intra_edges = listing.intra_count;
  out.row.inter_edges = listing.inter_count;
  return out;
}

void accumulate_stats(GenerationReport& r) {
  const std::size_t n = r.rows.size() - 1;  // synthetic rows
  auto mean_std = [n](auto get, const std::vector<GraphEvalRow>& rows, double* mean, double* sd) {
    double m = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) m += get(rows[i]);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double d = get(rows[i]) - m;
      v += d * d;
    }
    *mean = m;
    *sd = n > 1 ? std::sqrt(v / static_cast<double>(n - 1)) : 0.0;
  };
  mean_std([](const GraphEvalRow& r) { return r.auc; }, r.rows, &r.syn_mean_auc, &r.syn_std_auc);
  mean_std([](const GraphEvalRow& r) { return r.delta_sp; }, r.rows, &r.syn_mean_dsp,
           &r.syn_std_dsp);
  mean_std([](const GraphEvalRow& r) { return r.delta_eo; }, r.rows, &r.syn_mean_deo,
           &r.syn_std_deo);
  double dummy;
  mean_std([](const GraphEvalRow& r) { return r.degree_w1; }, r.rows, &r.syn_mean_degree_w1,
           &dummy);
  mean_std([](const GraphEvalRow& r) { return r.clustering_w1; }, r.rows,
           &r.syn_mean_clustering_w1, &dummy);
  r.amplification = r.syn_mean_dsp >= r.rows[0].delta_sp;
}

}  // namespace

GenerationReport bias_amplification_study(const Graph& real, const EdgeSplit& split,
                                          const GraphSampler& sampler, const StudyConfig& config) {
  if (config.n_samples < 1) throw ValidationError("study: need at least one sample");
  const SensitivePartition real_partition = SensitivePartition::from_graph(real);

  // Generated graphs carry binary features; the real row is trained on the
  // binary view of its features so both sides see the same modality.
  Graph real_view = real;
  real_view.features = diffusion::binarize_features(real.features);

  GenerationReport report;
  {
    GraphEvalRow row;
    row.name = "real";
    const FairnessReport fr = [&] {
      TrainConfig lp = config.lp;
      const TrainResult trained = train_lp(real_view, split, lp);
      return evaluate_lp(trained.params, real_view, split);
    }();
    row.auc = fr.auc.value_or(0.0);
    row.delta_sp = fr.delta_sp;
    row.delta_eo = fr.delta_eo;
    const IntraInterListing listing = intra_inter_listing(real, real_partition);
    row.intra_edges = listing.intra_count;
    row.inter_edges = listing.inter_count;
    report.rows.push_back(row);
  }

  std::vector<GraphEvalRow> syn_rows(config.n_samples);
  const int jobs = std::max(1, config.jobs);
  std::vector<std::string> errors(config.n_samples);
  for (int start = 0; start < config.n_samples; start += jobs) {
    const int end = std::min(config.n_samples, start + jobs);
    std::vector<std::thread> pool;
    for (int i = start; i < end; ++i) {
      pool.emplace_back([&, i]() {
        try {
          const Graph synthetic = sampler(i);
          syn_rows[i] = evaluate_synthetic(real, split, real_partition, synthetic, i, config).row;
        } catch (const std::exception& ex) {
          errors[i] = ex.what();
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (int i = 0; i < config.n_samples; ++i)
    if (!errors[i].empty())
      throw Error("study: sample " + std::to_string(i) + " failed: " + errors[i]);
  for (auto& row : syn_rows) report.rows.push_back(std::move(row));

  accumulate_stats(report);
  return report;
}

GenerationReport bias_amplification_study(const Graph& real, const EdgeSplit& split,
                                          const diffusion::DenoiserParams& generator,
                                          const StudyConfig& config) {
  // Index-aligned sampling: the synthetic sensitive assignment is the real
  // one, so models trained on samples stay comparable on the real test set.
  GraphSampler sampler = [&real, &generator, &config](int index) {
    std::mt19937_64 rng(config.sample_seed + static_cast<std::uint64_t>(index) * 0x9e3779b9ULL);
    return diffusion::sample_graph_with_sensitive(generator, real.sensitive, real.n_groups, rng);
  };
  return bias_amplification_study(real, split, sampler, config);
}

// ---------------------------------------------------------------------------
// report serialization

std::string generation_report_to_csv(const GenerationReport& r) {
  std::ostringstream out;
  out << "name,auc,delta_sp,delta_eo,degree_w1,clustering_w1,intra_edges,inter_edges\n";
  for (const auto& row : r.rows)
    out << row.name << "," << io::fmt_double(row.auc) << "," << io::fmt_double(row.delta_sp) << ","
        << io::fmt_double(row.delta_eo) << "," << io::fmt_double(row.degree_w1) << ","
        << io::fmt_double(row.clustering_w1) << "," << row.intra_edges << "," << row.inter_edges
        << "\n";
  out << "aggregate_mean," << io::fmt_double(r.syn_mean_auc) << "," << io::fmt_double(r.syn_mean_dsp)
      << "," << io::fmt_double(r.syn_mean_deo) << "," << io::fmt_double(r.syn_mean_degree_w1) << ","
      << io::fmt_double(r.syn_mean_clustering_w1) << ",,\n";
  out << "aggregate_std," << io::fmt_double(r.syn_std_auc) << "," << io::fmt_double(r.syn_std_dsp)
      << "," << io::fmt_double(r.syn_std_deo) << ",,,,\n";
  return out.str();
}

std::string generation_report_summary(const GenerationReport& r) {
  std::ostringstream out;
  out << "real_auc " << io::fmt_double(r.rows[0].auc) << "\n";
  out << "real_delta_sp " << io::fmt_double(r.rows[0].delta_sp) << "\n";
  out << "real_delta_eo " << io::fmt_double(r.rows[0].delta_eo) << "\n";
  out << "synthetic_mean_auc " << io::fmt_double(r.syn_mean_auc) << "\n";
  out << "synthetic_std_auc " << io::fmt_double(r.syn_std_auc) << "\n";
  out << "synthetic_mean_delta_sp " << io::fmt_double(r.syn_mean_dsp) << "\n";
  out << "synthetic_std_delta_sp " << io::fmt_double(r.syn_std_dsp) << "\n";
  out << "synthetic_mean_delta_eo " << io::fmt_double(r.syn_mean_deo) << "\n";
  out << "synthetic_std_delta_eo " << io::fmt_double(r.syn_std_deo) << "\n";
  out << "synthetic_mean_degree_w1 " << io::fmt_double(r.syn_mean_degree_w1) << "\n";
  out << "synthetic_mean_clustering_w1 " << io::fmt_double(r.syn_mean_clustering_w1) << "\n";
  out << "amplification " << (r.amplification ? 1 : 0) << "\n";
  // node alignment convention: synthetic nodes are index-matched to real ones
  out << "alignment index-matched\n";
  return out.str();
}

}  // namespace graphfair::eval
