#include "graphfair/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "graphfair/text_io.hpp"

namespace graphfair {

void BoundParams::validate() const {
  if (!(lipschitz > 0.0)) throw ValidationError("bound params: lipschitz must be positive");
  if (!(feature_bound > 0.0)) throw ValidationError("bound params: feature bound must be positive");
  if (!(deviation >= 0.0)) throw ValidationError("bound params: deviation must be nonnegative");
  if (!(embed_norm > 0.0)) throw ValidationError("bound params: embedding norm must be positive");
  if (!(decoder_norm > 0.0)) throw ValidationError("bound params: decoder norm must be positive");
  if (hidden_dim < 1) throw ValidationError("bound params: hidden dim must be positive");
}

// ---------------------------------------------------------------------------
// metrics

double delta_sp(const EdgeProbMatrix& prob, const SensitivePartition& partition) {
  const std::size_t n = prob.n();
  if (partition.n_nodes != static_cast<int>(n))
    throw ValidationError("delta_sp: partition size != matrix size");
  double intra_sum = 0.0, inter_sum = 0.0;
  long intra_cnt = 0, inter_cnt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int si = partition.labels[i];
    const double* row = prob.p.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (partition.labels[j] == si) {
        intra_sum += row[j];
        ++intra_cnt;
      } else {
        inter_sum += row[j];
        ++inter_cnt;
      }
    }
  }
  if (intra_cnt == 0 || inter_cnt == 0)
    throw MetricError("delta_sp: needs at least one intra and one inter pair");
  return std::abs(intra_sum / intra_cnt - inter_sum / inter_cnt);
}

double delta_eo(const EdgeProbMatrix& prob, const Graph& truth,
                const SensitivePartition& partition) {
  if (truth.n_nodes != static_cast<int>(prob.n()))
    throw ValidationError("delta_eo: graph size != matrix size");
  return delta_eo(prob, truth.edges, partition);
}

double delta_eo(const EdgeProbMatrix& prob, const std::vector<Edge>& true_edges,
                const SensitivePartition& partition) {
  double intra_sum = 0.0, inter_sum = 0.0;
  long intra_cnt = 0, inter_cnt = 0;
  for (const Edge& e : true_edges) {
    const double v = prob.p(e.u, e.v);  // both orders carry the same value
    if (partition.labels[e.u] == partition.labels[e.v]) {
      intra_sum += 2.0 * v;
      intra_cnt += 2;
    } else {
      inter_sum += 2.0 * v;
      inter_cnt += 2;
    }
  }
  if (intra_cnt == 0) throw MetricError("delta_eo: no true intra edges");
  if (inter_cnt == 0) throw MetricError("delta_eo: no true inter edges");
  return std::abs(intra_sum / intra_cnt - inter_sum / inter_cnt);
}

double delta_sp_on_pairs(const EdgeProbMatrix& prob, const SensitivePartition& partition,
                         const std::vector<Edge>& pairs) {
  double intra_sum = 0.0, inter_sum = 0.0;
  long intra_cnt = 0, inter_cnt = 0;
  for (const Edge& e : pairs) {
    const double v = prob.p(e.u, e.v);
    if (partition.labels[e.u] == partition.labels[e.v]) {
      intra_sum += v;
      ++intra_cnt;
    } else {
      inter_sum += v;
      ++inter_cnt;
    }
  }
  if (intra_cnt == 0 || inter_cnt == 0)
    throw MetricError("delta_sp_on_pairs: pair set misses one class");
  return std::abs(intra_sum / intra_cnt - inter_sum / inter_cnt);
}

// ---------------------------------------------------------------------------
// optimal structure

OptimalTargets optimal_targets(double total_mass, const SensitivePartition& partition) {
  if (!(total_mass >= 0.0)) throw ValidationError("optimal_targets: total mass must be >= 0");
  const double n = static_cast<double>(partition.n_nodes);
  OptimalTargets t;
  t.intra.resize(partition.n_groups);
  t.inter.resize(partition.n_groups);
  for (int k = 0; k < partition.n_groups; ++k) {
    const double sk = static_cast<double>(partition.group_sizes[k]);
    t.intra[k] = total_mass * sk * sk / (n * n);
    t.inter[k] = total_mass * (n * sk - sk * sk) / (n * n);
  }
  return t;
}

AlphaTerms alpha_terms(const GroupEdgeMass& mass, const SensitivePartition& partition) {
  const double n = static_cast<double>(partition.n_nodes);
  AlphaTerms a;
  a.alpha1.resize(partition.n_groups);
  a.alpha2.resize(partition.n_groups);
  for (int k = 0; k < partition.n_groups; ++k) {
    const double sk = static_cast<double>(partition.group_sizes[k]);
    const double rest = n - sk;
    const double pw = mass.intra[k];
    const double px = mass.inter[k];
    if (rest == 0.0) {
      // single populated group: only the intra ratio is defined
      a.alpha1[k] = 0.0;
      a.alpha2[k] = 0.0;
      continue;
    }
    a.alpha1[k] = std::abs(pw / sk - px / rest);
    a.alpha2[k] = std::abs((mass.total - pw - 2.0 * px) / rest - px / sk);
  }
  return a;
}

// ---------------------------------------------------------------------------
// regularizers

namespace {

// Ordered-pair masks for one group: intra (i,j) both in k, inter i in k and
// j outside, diagonal excluded. `restrict_to` limits rows and columns to a
// batch; empty means all nodes.
void group_masks(const SensitivePartition& partition, int k, const std::vector<int>& restrict_to,
                 Matrix* intra, Matrix* inter) {
  const int n = partition.n_nodes;
  *intra = Matrix(n, n);
  *inter = Matrix(n, n);
  std::vector<char> in_batch;
  if (!restrict_to.empty()) {
    in_batch.assign(n, 0);
    for (int b : restrict_to) in_batch[b] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (!in_batch.empty() && !in_batch[i]) continue;
    if (partition.labels[i] != k) continue;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (!in_batch.empty() && !in_batch[j]) continue;
      if (partition.labels[j] == k)
        (*intra)(i, j) = 1.0;
      else
        (*inter)(i, j) = 1.0;
    }
  }
}

double masked_sum(const Matrix& values, const Matrix& mask) {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += values.data()[i] * mask.data()[i];
  return s;
}

}  // namespace

double mass_target_regularizer(const EdgeProbMatrix& prob, const SensitivePartition& partition,
                               double e_ref) {
  const GroupEdgeMass mass = group_edge_mass(prob, partition);
  const OptimalTargets t = optimal_targets(e_ref, partition);
  double loss = 0.0;
  for (int k = 0; k < partition.n_groups; ++k)
    loss += std::abs(mass.intra[k] - t.intra[k]) + std::abs(mass.inter[k] - t.inter[k]);
  return loss;
}

ad::Tensor mass_target_regularizer(ad::Tape& tape, ad::Tensor prob,
                                   const SensitivePartition& partition, double e_ref) {
  if (prob.rows() != prob.cols() || prob.rows() != static_cast<std::size_t>(partition.n_nodes))
    throw ValidationError("mass_target_regularizer: prob must be N x N");
  const OptimalTargets t = optimal_targets(e_ref, partition);
  ad::Tensor loss = tape.constant_scalar(0.0);
  for (int k = 0; k < partition.n_groups; ++k) {
    Matrix mi, mx;
    group_masks(partition, k, {}, &mi, &mx);
    ad::Tensor dw = tape.abs(tape.sub(tape.mask_sum(prob, mi), tape.constant_scalar(t.intra[k])));
    ad::Tensor dx = tape.abs(tape.sub(tape.mask_sum(prob, mx), tape.constant_scalar(t.inter[k])));
    loss = tape.add(loss, tape.add(dw, dx));
  }
  return loss;
}

double batch_ratio_regularizer(const EdgeProbMatrix& prob, const SensitivePartition& partition,
                               const std::vector<int>& batch) {
  if (batch.size() < 2) throw ValidationError("batch regularizer: batch needs >= 2 nodes");
  const double n = static_cast<double>(partition.n_nodes);
  double loss = 0.0;
  for (int k = 0; k < partition.n_groups; ++k) {
    Matrix mi, mx;
    group_masks(partition, k, batch, &mi, &mx);
    const double sk = static_cast<double>(partition.group_sizes[k]);
    loss += std::abs(masked_sum(prob.p, mi) / sk - masked_sum(prob.p, mx) / (n - sk));
  }
  return loss;
}

ad::Tensor batch_ratio_regularizer(ad::Tape& tape, ad::Tensor prob,
                                   const SensitivePartition& partition,
                                   const std::vector<int>& batch) {
  if (batch.size() < 2) throw ValidationError("batch regularizer: batch needs >= 2 nodes");
  if (prob.rows() != static_cast<std::size_t>(partition.n_nodes))
    throw ValidationError("batch regularizer: prob must be N x N");
  const double n = static_cast<double>(partition.n_nodes);
  ad::Tensor loss = tape.constant_scalar(0.0);
  for (int k = 0; k < partition.n_groups; ++k) {
    Matrix mi, mx;
    group_masks(partition, k, batch, &mi, &mx);
    const double sk = static_cast<double>(partition.group_sizes[k]);
    ad::Tensor term = tape.abs(tape.sub(tape.scale(tape.mask_sum(prob, mi), 1.0 / sk),
                                        tape.scale(tape.mask_sum(prob, mx), 1.0 / (n - sk))));
    loss = tape.add(loss, term);
  }
  return loss;
}

ad::Tensor batch_ratio_regularizer_block(ad::Tape& tape, ad::Tensor prob_block,
                                         const std::vector<int>& block_nodes,
                                         const SensitivePartition& partition) {
  const std::size_t b = block_nodes.size();
  if (b < 2) throw ValidationError("batch regularizer: batch needs >= 2 nodes");
  if (prob_block.rows() != b || prob_block.cols() != b)
    throw ValidationError("batch regularizer: block shape mismatch");
  const double n = static_cast<double>(partition.n_nodes);
  ad::Tensor loss = tape.constant_scalar(0.0);
  for (int k = 0; k < partition.n_groups; ++k) {
    Matrix mi(b, b), mx(b, b);
    for (std::size_t r = 0; r < b; ++r) {
      if (partition.labels[block_nodes[r]] != k) continue;
      for (std::size_t c = 0; c < b; ++c) {
        if (r == c) continue;
        if (partition.labels[block_nodes[c]] == k)
          mi(r, c) = 1.0;
        else
          mx(r, c) = 1.0;
      }
    }
    const double sk = static_cast<double>(partition.group_sizes[k]);
    ad::Tensor term = tape.abs(tape.sub(tape.scale(tape.mask_sum(prob_block, mi), 1.0 / sk),
                                        tape.scale(tape.mask_sum(prob_block, mx), 1.0 / (n - sk))));
    loss = tape.add(loss, term);
  }
  return loss;
}

ad::Tensor batch_ratio_regularizer_pairs(ad::Tape& tape, ad::Tensor pair_probs,
                                         const std::vector<Edge>& pairs,
                                         const SensitivePartition& partition) {
  if (pair_probs.rows() != pairs.size() || pair_probs.cols() != 1)
    throw ValidationError("batch regularizer: pair probabilities must be M x 1");
  const double n = static_cast<double>(partition.n_nodes);
  ad::Tensor loss = tape.constant_scalar(0.0);
  for (int k = 0; k < partition.n_groups; ++k) {
    Matrix wi(pairs.size(), 1), wx(pairs.size(), 1);
    for (std::size_t m = 0; m < pairs.size(); ++m) {
      const int su = partition.labels[pairs[m].u];
      const int sv = partition.labels[pairs[m].v];
      if (su == k && sv == k)
        wi(m, 0) = 2.0;  // both ordered copies are intra for k
      else if (su == k || sv == k)
        wx(m, 0) = 1.0;  // one ordered copy leaves group k
    }
    const double sk = static_cast<double>(partition.group_sizes[k]);
    ad::Tensor term =
        tape.abs(tape.sub(tape.scale(tape.mask_sum(pair_probs, wi), 1.0 / sk),
                          tape.scale(tape.mask_sum(pair_probs, wx), 1.0 / (n - sk))));
    loss = tape.add(loss, term);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// bounds

std::vector<double> theorem1_bound(const GroupEdgeMass& mass, const BoundParams& params,
                                   const SensitivePartition& partition) {
  params.validate();
  const AlphaTerms a = alpha_terms(mass, partition);
  const double n = static_cast<double>(partition.n_nodes);
  std::vector<double> bounds(partition.n_groups);
  for (int k = 0; k < partition.n_groups; ++k) {
    bounds[k] = params.lipschitz *
                (params.feature_bound * std::sqrt(static_cast<double>(params.hidden_dim)) *
                     (a.alpha1[k] + a.alpha2[k]) +
                 2.0 * std::sqrt(n) * params.deviation);
  }
  return bounds;
}

double prop1_bound(const std::vector<double>& delta_k_max, const BoundParams& params,
                   const SensitivePartition& partition) {
  params.validate();
  if (delta_k_max.size() != static_cast<std::size_t>(partition.n_groups))
    throw ValidationError("prop1_bound: group count mismatch");
  const double n = static_cast<double>(partition.n_nodes);
  double bound = 0.0;
  for (int k = 0; k < partition.n_groups; ++k) {
    if (!(delta_k_max[k] >= 0.0)) throw ValidationError("prop1_bound: disparity must be >= 0");
    bound += (partition.group_sizes[k] / n) * params.embed_norm * params.decoder_norm *
             delta_k_max[k];
  }
  return bound;
}

double corollary_bound(const GroupEdgeMass& mass, const BoundParams& params,
                       const SensitivePartition& partition) {
  return prop1_bound(theorem1_bound(mass, params, partition), params, partition);
}

Matrix expected_relu_aggregation(const EdgeProbMatrix& prob, const Matrix& c) {
  if (c.rows() != prob.n()) throw ValidationError("aggregation: c row count != matrix size");
  Matrix z = matmul(prob.p, c);
  for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
  return z;
}

std::vector<double> group_mean_disparities(const Matrix& h, const SensitivePartition& partition) {
  if (h.rows() != static_cast<std::size_t>(partition.n_nodes))
    throw ValidationError("group disparities: row count != node count");
  const std::size_t d = h.cols();
  std::vector<double> out(partition.n_groups, 0.0);
  for (int k = 0; k < partition.n_groups; ++k) {
    const double in_sz = partition.group_sizes[k];
    const double out_sz = partition.n_nodes - partition.group_sizes[k];
    if (out_sz == 0.0) continue;
    std::vector<double> diff(d, 0.0);
    for (int i = 0; i < partition.n_nodes; ++i) {
      const double w = partition.labels[i] == k ? 1.0 / in_sz : -1.0 / out_sz;
      const double* row = h.row_ptr(i);
      for (std::size_t f = 0; f < d; ++f) diff[f] += w * row[f];
    }
    double norm = 0.0;
    for (double v : diff) norm += v * v;
    out[k] = std::sqrt(norm);
  }
  return out;
}

BoundParams bound_params_for_aggregation(const EdgeProbMatrix& prob, const Matrix& c) {
  BoundParams p;
  p.lipschitz = 1.0;  // ReLU
  double max_inf = 0.0;
  for (double v : c.data()) max_inf = std::max(max_inf, std::abs(v));
  p.feature_bound = std::max(max_inf, 1e-12);
  p.hidden_dim = static_cast<int>(c.cols());

  const Matrix z = matmul(prob.p, c);
  std::vector<double> mean(z.cols(), 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t f = 0; f < z.cols(); ++f) mean[f] += z(i, f);
  for (double& v : mean) v /= static_cast<double>(z.rows());
  double dev = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t f = 0; f < z.cols(); ++f) dev = std::max(dev, std::abs(z(i, f) - mean[f]));
  p.deviation = dev;
  return p;
}

double bilinear_score_gap(const Matrix& embeddings, const SensitivePartition& partition) {
  const std::size_t d = embeddings.cols();
  const double n = static_cast<double>(partition.n_nodes);
  double gap = 0.0;
  for (int k = 0; k < partition.n_groups; ++k) {
    const double in_sz = partition.group_sizes[k];
    const double out_sz = n - in_sz;
    if (out_sz == 0.0) continue;
    std::vector<double> pk(d, 0.0), qk(d, 0.0);
    for (int i = 0; i < partition.n_nodes; ++i) {
      const double* row = embeddings.row_ptr(i);
      if (partition.labels[i] == k)
        for (std::size_t f = 0; f < d; ++f) pk[f] += row[f] / in_sz;
      else
        for (std::size_t f = 0; f < d; ++f) qk[f] += row[f] / out_sz;
    }
    double term = 0.0;
    for (std::size_t f = 0; f < d; ++f) term += pk[f] * (pk[f] - qk[f]);
    gap += (in_sz / n) * term;
  }
  return std::abs(gap);
}

AssumptionCheck check_assumptions(const EdgeProbMatrix& prob, const SensitivePartition& partition,
                                  const Matrix& c_vectors, double delta, double a3_factor) {
  const int n = partition.n_nodes;
  if (static_cast<int>(prob.n()) != n)
    throw ValidationError("check_assumptions: partition size != matrix size");
  AssumptionCheck out;
  out.a3_factor = a3_factor;

  double max_inf = 0.0;
  for (double v : c_vectors.data()) max_inf = std::max(max_inf, std::abs(v));
  out.a1_max_norm = max_inf;
  out.a1_bound = delta;
  out.a1 = max_inf <= delta;

  double total = 0.0, worst_a2 = std::numeric_limits<double>::infinity();
  double max_inter_deg = 0.0;
  int worst_a2_node = -1, max_inter_node = -1;
  for (int i = 0; i < n; ++i) {
    const int k = partition.labels[i];
    const double sk = static_cast<double>(partition.group_sizes[k]);
    const double rest = static_cast<double>(n) - sk;
    double intra_deg = 0.0, inter_deg = 0.0;
    const double* row = prob.p.row_ptr(i);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      total += row[j];
      if (partition.labels[j] == k)
        intra_deg += row[j];
      else
        inter_deg += row[j];
    }
    if (inter_deg > max_inter_deg) {
      max_inter_deg = inter_deg;
      max_inter_node = i;
    }
    const double margin = rest > 0.0 ? intra_deg / sk - inter_deg / rest
                                     : std::numeric_limits<double>::infinity();
    if (margin < worst_a2) {
      worst_a2 = margin;
      worst_a2_node = i;
    }
  }
  out.a2 = worst_a2 >= 0.0;
  out.a2_worst_node = worst_a2_node;
  out.a2_margin = worst_a2;
  out.a3_margin = total - a3_factor * max_inter_deg;
  out.a3 = out.a3_margin >= 0.0;
  out.a3_worst_node = max_inter_node;
  return out;
}

// ---------------------------------------------------------------------------
// report serialization

std::string report_to_kv(const FairnessReport& r) {
  std::ostringstream out;
  out << "delta_sp " << io::fmt_double(r.delta_sp) << "\n";
  out << "delta_eo " << io::fmt_double(r.delta_eo) << "\n";
  if (r.auc) out << "auc " << io::fmt_double(*r.auc) << "\n";
  if (r.delta_sp_test_pairs)
    out << "delta_sp_test_pairs " << io::fmt_double(*r.delta_sp_test_pairs) << "\n";
  if (r.score_gap) out << "score_gap " << io::fmt_double(*r.score_gap) << "\n";
  for (std::size_t k = 0; k < r.alpha1.size(); ++k)
    out << "alpha1_" << k << " " << io::fmt_double(r.alpha1[k]) << "\n";
  for (std::size_t k = 0; k < r.alpha2.size(); ++k)
    out << "alpha2_" << k << " " << io::fmt_double(r.alpha2[k]) << "\n";
  for (std::size_t k = 0; k < r.theorem1_bounds.size(); ++k)
    out << "theorem1_bound_" << k << " " << io::fmt_double(r.theorem1_bounds[k]) << "\n";
  out << "prop1_bound " << io::fmt_double(r.prop1_bound) << "\n";
  out << "corollary_bound " << io::fmt_double(r.corollary_bound) << "\n";
  out << "assumption_a1 " << (r.assumptions.a1 ? 1 : 0) << "\n";
  out << "assumption_a1_max_norm " << io::fmt_double(r.assumptions.a1_max_norm) << "\n";
  out << "assumption_a2 " << (r.assumptions.a2 ? 1 : 0) << "\n";
  out << "assumption_a2_worst_node " << r.assumptions.a2_worst_node << "\n";
  out << "assumption_a2_margin " << io::fmt_double(r.assumptions.a2_margin) << "\n";
  out << "assumption_a3 " << (r.assumptions.a3 ? 1 : 0) << "\n";
  out << "assumption_a3_margin " << io::fmt_double(r.assumptions.a3_margin) << "\n";
  out << "assumption_a3_factor " << io::fmt_double(r.assumptions.a3_factor) << "\n";
  return out.str();
}

std::string report_csv_header(int n_groups) {
  std::ostringstream out;
  out << "delta_sp,delta_eo,auc,prop1_bound,corollary_bound";
  for (int k = 0; k < n_groups; ++k) out << ",alpha1_" << k;
  for (int k = 0; k < n_groups; ++k) out << ",alpha2_" << k;
  for (int k = 0; k < n_groups; ++k) out << ",theorem1_bound_" << k;
  return out.str();
}

std::string report_to_csv_row(const FairnessReport& r) {
  std::ostringstream out;
  out << io::fmt_double(r.delta_sp) << "," << io::fmt_double(r.delta_eo) << ","
      << (r.auc ? io::fmt_double(*r.auc) : "") << "," << io::fmt_double(r.prop1_bound) << ","
      << io::fmt_double(r.corollary_bound);
  for (double v : r.alpha1) out << "," << io::fmt_double(v);
  for (double v : r.alpha2) out << "," << io::fmt_double(v);
  for (double v : r.theorem1_bounds) out << "," << io::fmt_double(v);
  return out.str();
}

}  // namespace graphfair
