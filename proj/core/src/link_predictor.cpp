#include "graphfair/link_predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "graphfair/optim.hpp"
#include "graphfair/text_io.hpp"

namespace graphfair {

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ValidationError("train config: lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw ValidationError("train config: learning rate must be > 0");
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (batch_size < 2) throw ValidationError("train config: batch size must be >= 2");
  if (hidden_dim < 1) throw ValidationError("train config: hidden dim must be >= 1");
  if (!(negative_ratio > 0.0)) throw ValidationError("train config: negative ratio must be > 0");
}

GcnParams GcnParams::init(std::size_t in_dim, std::size_t hidden_dim, std::uint64_t seed) {
  if (hidden_dim < 1) throw ValidationError("gcn: hidden dimension must be >= 1");
  GcnParams p;
  p.seed = seed;
  p.weight = Matrix(in_dim, hidden_dim);
  std::mt19937_64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + hidden_dim));
  std::uniform_real_distribution<double> unif(-limit, limit);
  for (double& w : p.weight.data()) w = unif(rng);
  return p;
}

Matrix normalized_adjacency(int n_nodes, const std::vector<Edge>& message_edges) {
  Matrix a(n_nodes, n_nodes);
  for (const Edge& e : message_edges) {
    a(e.u, e.v) = 1.0;
    a(e.v, e.u) = 1.0;
  }
  // Self connections stabilize the encoding; fully isolated nodes stay
  // all-zero rows so they embed to the zero vector.
  std::vector<double> dinv(n_nodes, 0.0);
  for (int i = 0; i < n_nodes; ++i) {
    double d = 0.0;
    for (int j = 0; j < n_nodes; ++j) d += a(i, j);
    if (d > 0.0) {
      a(i, i) = 1.0;
      dinv[i] = 1.0 / std::sqrt(d + 1.0);
    }
  }
  for (int i = 0; i < n_nodes; ++i)
    for (int j = 0; j < n_nodes; ++j) a(i, j) *= dinv[i] * dinv[j];
  return a;
}

Matrix encode(const Graph& g, const std::vector<Edge>& message_edges, const GcnParams& params) {
  if (params.weight.rows() != g.features.cols())
    throw ValidationError("encode: weight rows != feature dimension");
  const Matrix ahat = normalized_adjacency(g.n_nodes, message_edges);
  Matrix h = matmul(ahat, matmul(g.features, params.weight));
  for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
  return h;
}

double inner_score(const Matrix& embeddings, int i, int j) {
  const double* a = embeddings.row_ptr(i);
  const double* b = embeddings.row_ptr(j);
  double s = 0.0;
  for (std::size_t f = 0; f < embeddings.cols(); ++f) s += a[f] * b[f];
  return s;
}

double decode(const Matrix& embeddings, int i, int j) {
  return 1.0 / (1.0 + std::exp(-inner_score(embeddings, i, j)));
}

EdgeProbMatrix decode_all(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows();
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = decode(embeddings, static_cast<int>(i), static_cast<int>(j));
      p(i, j) = v;
      p(j, i) = v;
    }
  return EdgeProbMatrix{std::move(p)};
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l != 0 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw MetricError("auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) pos_rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::string history_to_csv(const TrainHistory& h) {
  std::ostringstream out;
  out << "epoch,loss,ce,reg,val_auc,val_dsp\n";
  for (const EpochStats& e : h)
    out << e.epoch << "," << io::fmt_double(e.loss) << "," << io::fmt_double(e.ce) << ","
        << io::fmt_double(e.reg) << "," << io::fmt_double(e.val_auc) << ","
        << io::fmt_double(e.val_dsp) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// training

namespace {

double plain_block_regularizer(const Matrix& h, const std::vector<int>& batch,
                               const SensitivePartition& partition) {
  const std::size_t b = batch.size();
  const double n = static_cast<double>(partition.n_nodes);
  std::vector<double> intra(partition.n_groups, 0.0), inter(partition.n_groups, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    const int i = batch[r];
    for (std::size_t c = 0; c < b; ++c) {
      if (r == c) continue;
      const int j = batch[c];
      const double p = decode(h, i, j);
      if (partition.labels[i] == partition.labels[j])
        intra[partition.labels[i]] += p;
      else
        inter[partition.labels[i]] += p;
    }
  }
  double loss = 0.0;
  for (int k = 0; k < partition.n_groups; ++k) {
    const double sk = static_cast<double>(partition.group_sizes[k]);
    loss += std::abs(intra[k] / sk - inter[k] / (n - sk));
  }
  return loss;
}

}  // namespace

LpLossParts lp_batch_loss(ad::Tape& tape, ad::Tensor embeddings,
                          const std::vector<std::size_t>& pi, const std::vector<std::size_t>& pj,
                          const Matrix& labels, const std::vector<int>& batch,
                          const SensitivePartition& partition, double lambda) {
  if (pi.size() != pj.size() || labels.rows() != pi.size() || labels.cols() != 1)
    throw ValidationError("lp loss: pair lists and labels disagree");
  LpLossParts parts;
  if (!pi.empty()) {
    ad::Tensor hi = tape.gather_rows(embeddings, pi);
    ad::Tensor hj = tape.gather_rows(embeddings, pj);
    ad::Tensor logits = tape.row_sum(tape.mul(hi, hj));
    parts.ce = tape.scale(tape.sum(tape.sigmoid_ce(logits, labels)),
                          1.0 / static_cast<double>(pi.size()));
  } else {
    parts.ce = tape.constant_scalar(0.0);
  }
  if (lambda > 0.0) {
    std::vector<std::size_t> bidx(batch.begin(), batch.end());
    ad::Tensor hb = tape.gather_rows(embeddings, bidx);
    ad::Tensor probs = tape.sigmoid(tape.matmul_nt(hb, hb));
    parts.reg = batch_ratio_regularizer_block(tape, probs, batch, partition);
    parts.total = tape.add(parts.ce, tape.scale(parts.reg, lambda));
  } else {
    parts.reg = tape.constant_scalar(0.0);
    parts.total = parts.ce;
  }
  return parts;
}

TrainResult train_lp(const Graph& g, const EdgeSplit& split, const TrainConfig& config) {
  config.validate();
  g.validate();
  if (split.train_pos.empty() || split.val_pos.empty() || split.val_neg.empty())
    throw ValidationError("train_lp: split is missing a section");

  const SensitivePartition partition = SensitivePartition::from_graph(g);
  const Matrix ahat = normalized_adjacency(g.n_nodes, split.train_pos);
  const int batch_size = std::min<int>(config.batch_size, g.n_nodes);

  GcnParams params = GcnParams::init(g.features.cols(), config.hidden_dim, config.seed);

  Adam opt(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps);
  const std::size_t w_slot = opt.add_slot(params.weight.size());

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> perm(g.n_nodes);
  std::iota(perm.begin(), perm.end(), 0);

  // Negatives are presampled once per run from the non-edges; each epoch uses
  // the ones falling inside its node batch, mirroring the positive treatment.
  std::vector<Edge> negatives;
  {
    const std::size_t want = static_cast<std::size_t>(
        std::llround(config.negative_ratio * static_cast<double>(split.train_pos.size())));
    std::vector<Edge> non_edges;
    for (int i = 0; i < g.n_nodes; ++i)
      for (int j = i + 1; j < g.n_nodes; ++j)
        if (!g.has_edge(i, j)) non_edges.push_back(Edge{i, j});
    if (non_edges.size() < want)
      throw SizingError("train_lp: not enough non-edges for the negative ratio");
    std::shuffle(non_edges.begin(), non_edges.end(), rng);
    negatives.assign(non_edges.begin(), non_edges.begin() + want);
  }

  TrainResult result;
  result.best_epoch = -1;

  // Model selection keeps the Pareto front over (val_auc, val_dsp); at the
  // end the lowest-dsp epoch within the AUC tolerance of the best wins.
  struct Candidate {
    int epoch;
    double val_auc, val_dsp;
    Matrix weight;
  };
  std::vector<Candidate> front;
  double best_val_auc = -1.0;

  std::vector<char> in_batch(g.n_nodes, 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> batch(perm.begin(), perm.begin() + batch_size);
    std::sort(batch.begin(), batch.end());
    std::fill(in_batch.begin(), in_batch.end(), 0);
    for (int b : batch) in_batch[b] = 1;

    std::vector<std::size_t> pi, pj;
    for (const Edge& e : split.train_pos)
      if (in_batch[e.u] && in_batch[e.v]) {
        pi.push_back(e.u);
        pj.push_back(e.v);
      }
    const std::size_t n_pos = pi.size();
    for (const Edge& e : negatives)
      if (in_batch[e.u] && in_batch[e.v]) {
        pi.push_back(e.u);
        pj.push_back(e.v);
      }
    Matrix labels(pi.size(), 1);
    for (std::size_t p = 0; p < n_pos; ++p) labels(p, 0) = 1.0;

    ad::Tape tape;
    ad::Tensor w = tape.parameter(params.weight);
    ad::Tensor x = tape.constant(g.features);
    ad::Tensor a = tape.constant(ahat);
    ad::Tensor h = tape.relu(tape.matmul(a, tape.matmul(x, w)));

    const LpLossParts parts =
        lp_batch_loss(tape, h, pi, pj, labels, batch, partition, config.lambda);
    double reg_value = config.lambda > 0.0 ? parts.reg.scalar() : 0.0;

    const double loss_value = parts.total.scalar();
    if (!std::isfinite(loss_value))
      throw DivergenceError("train_lp: non-finite loss at epoch " + std::to_string(epoch));

    tape.backward(parts.total);
    opt.begin_step();
    opt.update(w_slot, params.weight, tape.grad_of(w));

    // per-epoch validation on the embeddings that produced this step
    const Matrix h_val = tape.value_of(h);
    if (config.lambda == 0.0) reg_value = plain_block_regularizer(h_val, batch, partition);

    std::vector<double> scores;
    std::vector<int> lab;
    scores.reserve(split.val_pos.size() + split.val_neg.size());
    for (const Edge& e : split.val_pos) {
      scores.push_back(decode(h_val, e.u, e.v));
      lab.push_back(1);
    }
    for (const Edge& e : split.val_neg) {
      scores.push_back(decode(h_val, e.u, e.v));
      lab.push_back(0);
    }
    const double val_auc = auc(scores, lab);
    const double val_dsp = delta_sp(decode_all(h_val), partition);

    result.history.push_back(
        {epoch, loss_value, parts.ce.scalar(), reg_value, val_auc, val_dsp});

    best_val_auc = std::max(best_val_auc, val_auc);
    const bool dominated = std::any_of(front.begin(), front.end(), [&](const Candidate& c) {
      return c.val_auc >= val_auc && c.val_dsp <= val_dsp;
    });
    if (!dominated) {
      std::erase_if(front, [&](const Candidate& c) {
        return (val_auc >= c.val_auc && val_dsp <= c.val_dsp) ||
               c.val_auc < best_val_auc - config.selection_auc_tolerance;
      });
      front.push_back({epoch, val_auc, val_dsp, params.weight});
    }
  }

  const Candidate* chosen = nullptr;
  if (config.selection == TrainConfig::Selection::best_auc) {
    for (const Candidate& c : front)
      if (!chosen || c.val_auc > chosen->val_auc) chosen = &c;
  } else {
    for (const Candidate& c : front) {
      if (c.val_auc < best_val_auc - config.selection_auc_tolerance) continue;
      if (!chosen || c.val_dsp < chosen->val_dsp) chosen = &c;
    }
  }
  if (!chosen) throw Error("train_lp: model selection found no candidate");
  result.best_epoch = chosen->epoch;
  result.params.weight = chosen->weight;
  result.params.seed = config.seed;
  return result;
}

// ---------------------------------------------------------------------------
// evaluation

BoundParams bound_params_from_model(const GcnParams& params, const Graph& g,
                                    const EdgeProbMatrix& prob, const Matrix& embeddings) {
  const Matrix c = matmul(g.features, params.weight);
  BoundParams bp = bound_params_for_aggregation(prob, c);
  bp.decoder_norm = 1.0;  // identity decoder
  double q = 0.0;
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    double norm = 0.0;
    const double* row = embeddings.row_ptr(i);
    for (std::size_t f = 0; f < embeddings.cols(); ++f) norm += row[f] * row[f];
    q = std::max(q, std::sqrt(norm));
  }
  bp.embed_norm = std::max(q, 1e-12);
  bp.hidden_dim = static_cast<int>(embeddings.cols());
  return bp;
}

FairnessReport model_report(const GcnParams& params, const Graph& g, const Matrix& embeddings,
                            const EdgeSplit* split) {
  const SensitivePartition partition = SensitivePartition::from_graph(g);
  const EdgeProbMatrix prob = decode_all(embeddings);
  const GroupEdgeMass mass = group_edge_mass(prob, partition);
  const BoundParams bp = bound_params_from_model(params, g, prob, embeddings);

  FairnessReport r;
  r.delta_sp = delta_sp(prob, partition);
  if (split) {
    r.delta_eo = delta_eo(prob, split->test_pos, partition);
    std::vector<Edge> test_pairs = split->test_pos;
    test_pairs.insert(test_pairs.end(), split->test_neg.begin(), split->test_neg.end());
    r.delta_sp_test_pairs = delta_sp_on_pairs(prob, partition, test_pairs);
  } else {
    r.delta_eo = delta_eo(prob, g, partition);
  }
  const AlphaTerms at = alpha_terms(mass, partition);
  r.alpha1 = at.alpha1;
  r.alpha2 = at.alpha2;
  r.theorem1_bounds = theorem1_bound(mass, bp, partition);
  r.prop1_bound = prop1_bound(group_mean_disparities(embeddings, partition), bp, partition);
  r.corollary_bound = corollary_bound(mass, bp, partition);
  r.score_gap = bilinear_score_gap(embeddings, partition);
  const Matrix c = matmul(g.features, params.weight);
  r.assumptions = check_assumptions(prob, partition, c, bp.feature_bound);
  return r;
}

FairnessReport evaluate_lp(const GcnParams& params, const Graph& g, const EdgeSplit& split) {
  const Matrix h = encode(g, split.train_pos, params);
  FairnessReport r = model_report(params, g, h, &split);
  std::vector<double> scores;
  std::vector<int> lab;
  for (const Edge& e : split.test_pos) {
    scores.push_back(decode(h, e.u, e.v));
    lab.push_back(1);
  }
  for (const Edge& e : split.test_neg) {
    scores.push_back(decode(h, e.u, e.v));
    lab.push_back(0);
  }
  r.auc = auc(scores, lab);
  return r;
}

}  // namespace graphfair
