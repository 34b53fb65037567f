#include "graphfair/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graphfair/optim.hpp"

namespace graphfair::diffusion {

// ---------------------------------------------------------------------------
// schedule and kernels

double cosine_alpha_bar_raw(int t, int steps, double offset) {
  const double x = (static_cast<double>(t) / static_cast<double>(steps) + offset) / (1.0 + offset);
  const double c = std::cos(0.5 * M_PI * x);
  return c * c;
}

NoiseSchedule build_schedule(int steps, double offset) {
  if (steps < 1) throw ValidationError("schedule: steps must be >= 1");
  if (!(offset > 0.0)) throw ValidationError("schedule: offset must be positive");
  NoiseSchedule s;
  s.steps = steps;
  s.offset = offset;
  s.alpha.assign(steps + 1, 1.0);
  s.alpha_bar.assign(steps + 1, 1.0);
  double prev_raw = cosine_alpha_bar_raw(0, steps, offset);
  for (int t = 1; t <= steps; ++t) {
    const double raw = cosine_alpha_bar_raw(t, steps, offset);
    s.alpha[t] = std::clamp(raw / prev_raw, 0.0, 1.0);
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];  // exact running product
    prev_raw = raw;
  }
  return s;
}

TransitionKernel TransitionKernel::uniform_mix(double alpha, const std::array<double, 2>& m) {
  TransitionKernel k;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) k.q[r][c] = (r == c ? alpha : 0.0) + (1.0 - alpha) * m[c];
  return k;
}

TransitionKernel TransitionKernel::compose(const TransitionKernel& next) const {
  TransitionKernel out;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      out.q[r][c] = q[r][0] * next.q[0][c] + q[r][1] * next.q[1][c];
  return out;
}

// ---------------------------------------------------------------------------
// marginals

Matrix binarize_features(const Matrix& x) {
  bool already_binary = true;
  for (double v : x.data())
    if (v != 0.0 && v != 1.0) {
      already_binary = false;
      break;
    }
  if (already_binary) return x;
  Matrix out(x.rows(), x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, f);
    mean /= static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out(i, f) = x(i, f) > mean ? 1.0 : 0.0;
  }
  return out;
}

ChannelMarginals marginals(const Matrix& adjacency, const Matrix& binary_features) {
  const std::size_t n = adjacency.rows();
  if (n < 2) throw ValidationError("marginals: need at least 2 nodes");
  ChannelMarginals m;
  double edge_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) edge_sum += adjacency(i, j);
  const double density = edge_sum / static_cast<double>(n * (n - 1));
  m.edge = {1.0 - density, density};
  m.feature.resize(binary_features.cols());
  for (std::size_t f = 0; f < binary_features.cols(); ++f) {
    double rate = 0.0;
    for (std::size_t i = 0; i < binary_features.rows(); ++i) rate += binary_features(i, f);
    rate /= static_cast<double>(binary_features.rows());
    m.feature[f] = {1.0 - rate, rate};
  }
  return m;
}

ChannelMarginals marginals(const Graph& g) {
  return marginals(g.adjacency(), binarize_features(g.features));
}

// ---------------------------------------------------------------------------
// forward noise

namespace {

inline int sample_from_row(const std::array<double, 2>& row, double u) {
  return u < row[0] ? 0 : 1;
}

std::vector<std::vector<int>> neighbors_of(const Matrix& adj) {
  std::vector<std::vector<int>> nb(adj.rows());
  for (std::size_t i = 0; i < adj.rows(); ++i)
    for (std::size_t j = 0; j < adj.cols(); ++j)
      if (i != j && adj(i, j) != 0.0) nb[i].push_back(static_cast<int>(j));
  return nb;
}

}  // namespace

NoisyGraph forward_noise(const Matrix& clean_adj, const Matrix& clean_features, int t,
                         const NoiseSchedule& schedule, const ChannelMarginals& m,
                         std::mt19937_64& rng) {
  if (t < 1 || t > schedule.steps) throw ValidationError("forward_noise: t out of range");
  const std::size_t n = clean_adj.rows();
  const double ab = schedule.alpha_bar_at(t);
  const TransitionKernel qe = TransitionKernel::uniform_mix(ab, m.edge);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  NoisyGraph out;
  out.t = t;
  out.adjacency = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const int label = clean_adj(i, j) != 0.0 ? 1 : 0;
      const int noisy = sample_from_row({qe.q[label][0], qe.q[label][1]}, unif(rng));
      out.adjacency(i, j) = noisy;
      out.adjacency(j, i) = noisy;
    }

  out.features = Matrix(clean_features.rows(), clean_features.cols());
  for (std::size_t f = 0; f < clean_features.cols(); ++f) {
    const TransitionKernel qx = TransitionKernel::uniform_mix(ab, m.feature[f]);
    for (std::size_t i = 0; i < clean_features.rows(); ++i) {
      const int label = clean_features(i, f) != 0.0 ? 1 : 0;
      out.features(i, f) = sample_from_row({qx.q[label][0], qx.q[label][1]}, unif(rng));
    }
  }
  out.neighbors = neighbors_of(out.adjacency);
  return out;
}

NoisyGraph forward_noise(const Graph& clean, int t, const NoiseSchedule& schedule,
                         const ChannelMarginals& m, std::mt19937_64& rng) {
  return forward_noise(clean.adjacency(), binarize_features(clean.features), t, schedule, m, rng);
}

// ---------------------------------------------------------------------------
// denoiser parameters

int DenoiserSizes::final_dim() const {
  // h^(t,0..L) + S^(0..L) + time embedding
  return hidden * (layers + 1) + n_groups + s_hidden * layers + time_hidden;
}

void DenoiserSizes::validate() const {
  if (layers < 1) throw ValidationError("denoiser: needs at least one layer");
  if (hidden < 2 || s_hidden < 2 || time_hidden < 2)
    throw ValidationError("denoiser: channel widths must be >= 2 (layernorm rows)");
  if (edge_hidden < 1) throw ValidationError("denoiser: edge head width must be >= 1");
  if (feature_dim < 1) throw ValidationError("denoiser: feature dim unset");
  if (n_groups < 1) throw ValidationError("denoiser: group count unset");
}

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> unif(-limit, limit);
  for (double& v : m.data()) v = unif(rng);
  return m;
}

// Biases start small, positive and distinct: all-zero input rows (isolated
// noisy nodes, blank feature rows) then sit strictly off the ReLU kink and
// away from the layernorm zero-variance point.
Matrix small_bias(std::size_t cols, std::mt19937_64& rng) {
  Matrix m(1, cols);
  std::uniform_real_distribution<double> unif(0.01, 0.1);
  for (double& v : m.data()) v = unif(rng);
  return m;
}

}  // namespace

DenoiserParams DenoiserParams::init(DenoiserSizes sizes, std::uint64_t seed) {
  sizes.validate();
  DenoiserParams p;
  p.sizes = sizes;
  std::mt19937_64 rng(seed);

  p.x_w1 = glorot(sizes.feature_dim, sizes.hidden, rng);
  p.x_b1 = small_bias(sizes.hidden, rng);
  p.x_w2 = glorot(sizes.hidden, sizes.hidden, rng);
  p.x_b2 = small_bias(sizes.hidden, rng);
  p.t_w1 = glorot(1, sizes.time_hidden, rng);
  p.t_b1 = small_bias(sizes.time_hidden, rng);
  p.t_w2 = glorot(sizes.time_hidden, sizes.time_hidden, rng);
  p.t_b2 = small_bias(sizes.time_hidden, rng);

  for (int l = 0; l < sizes.layers; ++l) {
    const int s_in = l == 0 ? sizes.n_groups : sizes.s_hidden;
    p.w_time.push_back(glorot(sizes.time_hidden, sizes.hidden, rng));
    p.w_hs.push_back(glorot(sizes.hidden + s_in, sizes.hidden, rng));
    p.w_ss.push_back(glorot(s_in, sizes.s_hidden, rng));
    p.b_h.push_back(small_bias(sizes.hidden, rng));
    p.b_s.push_back(small_bias(sizes.s_hidden, rng));
  }

  p.feat_w = glorot(sizes.final_dim(), sizes.feature_dim, rng);
  p.feat_b = small_bias(sizes.feature_dim, rng);
  p.edge_w1 = glorot(sizes.final_dim(), sizes.edge_hidden, rng);
  p.edge_b1 = small_bias(sizes.edge_hidden, rng);
  p.edge_w2 = glorot(sizes.edge_hidden, 1, rng);
  p.edge_b2 = small_bias(1, rng);
  return p;
}

std::vector<std::pair<std::string, Matrix*>> DenoiserParams::named_parameters() {
  std::vector<std::pair<std::string, Matrix*>> out = {
      {"x_w1", &x_w1}, {"x_b1", &x_b1}, {"x_w2", &x_w2}, {"x_b2", &x_b2},
      {"t_w1", &t_w1}, {"t_b1", &t_b1}, {"t_w2", &t_w2}, {"t_b2", &t_b2},
  };
  for (std::size_t l = 0; l < w_time.size(); ++l) {
    const std::string suffix = "_" + std::to_string(l);
    out.emplace_back("w_time" + suffix, &w_time[l]);
    out.emplace_back("w_hs" + suffix, &w_hs[l]);
    out.emplace_back("w_ss" + suffix, &w_ss[l]);
    out.emplace_back("b_h" + suffix, &b_h[l]);
    out.emplace_back("b_s" + suffix, &b_s[l]);
  }
  out.emplace_back("feat_w", &feat_w);
  out.emplace_back("feat_b", &feat_b);
  out.emplace_back("edge_w1", &edge_w1);
  out.emplace_back("edge_b1", &edge_b1);
  out.emplace_back("edge_w2", &edge_w2);
  out.emplace_back("edge_b2", &edge_b2);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> DenoiserParams::named_parameters() const {
  auto mutable_list = const_cast<DenoiserParams*>(this)->named_parameters();
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, m] : mutable_list) out.emplace_back(name, m);
  return out;
}

void DenoiserParams::validate() const {
  sizes.validate();
  for (const auto& [name, m] : named_parameters())
    for (double v : m->data())
      if (!std::isfinite(v)) throw ValidationError("denoiser: non-finite weight in " + name);
}

// ---------------------------------------------------------------------------
// tape model

DenoiserTapeModel::DenoiserTapeModel(ad::Tape& tape, const DenoiserParams& params, bool trainable)
    : tape_(tape), p_(params) {
  auto named = params.named_parameters();
  tensors_.reserve(named.size());
  for (auto& [name, m] : named)
    tensors_.push_back(trainable ? tape_.parameter(*m) : tape_.constant(*m));
}

namespace {
// indices into the named parameter list; layer blocks start after the fixed 8
constexpr std::size_t kXW1 = 0, kXB1 = 1, kXW2 = 2, kXB2 = 3;
constexpr std::size_t kTW1 = 4, kTB1 = 5, kTW2 = 6, kTB2 = 7;
constexpr std::size_t kLayerBase = 8, kPerLayer = 5;
}  // namespace

ad::Tensor DenoiserTapeModel::node_representations(const NoisyGraph& noisy,
                                                   const Matrix& sensitive_onehot, int t) {
  const std::size_t n = noisy.adjacency.rows();
  if (sensitive_onehot.rows() != n)
    throw ValidationError("denoiser: sensitive one-hot row count mismatch");
  if (noisy.features.cols() != static_cast<std::size_t>(p_.sizes.feature_dim))
    throw ValidationError("denoiser: feature dim mismatch");

  // timestep embedding from the normalized step index
  Matrix tval(1, 1);
  tval(0, 0) = static_cast<double>(t) / static_cast<double>(std::max(1, p_.schedule.steps));
  ad::Tensor tc = tape_.constant(tval);
  ad::Tensor h_t = tape_.add_row_bias(
      tape_.matmul(tape_.relu(tape_.add_row_bias(tape_.matmul(tc, at(kTW1)), at(kTB1))), at(kTW2)),
      at(kTB2));

  ad::Tensor x = tape_.constant(noisy.features);
  ad::Tensor h0 = tape_.add_row_bias(
      tape_.matmul(tape_.relu(tape_.add_row_bias(tape_.matmul(x, at(kXW1)), at(kXB1))), at(kXW2)),
      at(kXB2));

  std::vector<ad::Tensor> h_layers{h0};
  std::vector<ad::Tensor> s_layers{tape_.constant(sensitive_onehot)};

  for (int l = 0; l < p_.sizes.layers; ++l) {
    const std::size_t base = kLayerBase + kPerLayer * static_cast<std::size_t>(l);
    const ad::Tensor w_time = at(base + 0), w_hs = at(base + 1), w_ss = at(base + 2);
    const ad::Tensor b_h = at(base + 3), b_s = at(base + 4);

    std::array<ad::Tensor, 2> hs_parts{h_layers.back(), s_layers.back()};
    ad::Tensor hs = tape_.concat_rows(std::span<const ad::Tensor>(hs_parts));
    ad::Tensor agg = tape_.row_mean_aggregate(noisy.neighbors, hs);
    ad::Tensor pre = tape_.add_row_bias(tape_.matmul(agg, w_hs), b_h);
    pre = tape_.add(pre, tape_.repeat_row(tape_.matmul(h_t, w_time), n));
    h_layers.push_back(tape_.layernorm_rows(tape_.relu(pre)));

    ad::Tensor agg_s = tape_.row_mean_aggregate(noisy.neighbors, s_layers.back());
    ad::Tensor pre_s = tape_.add_row_bias(tape_.matmul(agg_s, w_ss), b_s);
    s_layers.push_back(tape_.layernorm_rows(tape_.relu(pre_s)));
  }

  std::vector<ad::Tensor> parts = h_layers;
  parts.insert(parts.end(), s_layers.begin(), s_layers.end());
  parts.push_back(tape_.repeat_row(h_t, n));
  return tape_.concat_rows(std::span<const ad::Tensor>(parts));
}

ad::Tensor DenoiserTapeModel::feature_logits(ad::Tensor node_repr_rows) {
  const std::size_t base = kLayerBase + kPerLayer * static_cast<std::size_t>(p_.sizes.layers);
  return tape_.add_row_bias(tape_.matmul(node_repr_rows, at(base + 0)), at(base + 1));
}

ad::Tensor DenoiserTapeModel::edge_logits(ad::Tensor node_repr, const std::vector<std::size_t>& i,
                                          const std::vector<std::size_t>& j) {
  const std::size_t base = kLayerBase + kPerLayer * static_cast<std::size_t>(p_.sizes.layers);
  const ad::Tensor w1 = at(base + 2), b1 = at(base + 3), w2 = at(base + 4), b2 = at(base + 5);
  ad::Tensor prod = tape_.mul(tape_.gather_rows(node_repr, i), tape_.gather_rows(node_repr, j));
  ad::Tensor hidden = tape_.relu(tape_.add_row_bias(tape_.matmul(prod, w1), b1));
  return tape_.add_row_bias(tape_.matmul(hidden, w2), b2);
}

// ---------------------------------------------------------------------------
// denoise (full-graph inference)

DenoisePrediction denoise(const NoisyGraph& noisy, const SensitivePartition& sensitive, int t,
                          const DenoiserParams& params) {
  const std::size_t n = noisy.adjacency.rows();
  ad::Tape tape;
  DenoiserTapeModel model(tape, params, /*trainable=*/false);
  ad::Tensor repr = model.node_representations(noisy, sensitive.onehot, t);

  DenoisePrediction out;
  {
    ad::Tensor logits = model.feature_logits(repr);
    Matrix probs = tape.value_of(tape.sigmoid(logits));
    out.feature_probs = std::move(probs);
  }
  {
    std::vector<std::size_t> is, js;
    is.reserve(n * (n - 1) / 2);
    js.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        is.push_back(i);
        js.push_back(j);
      }
    ad::Tensor logits = model.edge_logits(repr, is, js);
    const Matrix probs = tape.value_of(tape.sigmoid(logits));
    Matrix p(n, n);
    for (std::size_t m = 0; m < is.size(); ++m) {
      p(is[m], js[m]) = probs(m, 0);
      p(js[m], is[m]) = probs(m, 0);
    }
    out.edge_probs = EdgeProbMatrix{std::move(p)};
  }
  return out;
}

// ---------------------------------------------------------------------------
// training

void DiffusionTrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ValidationError("diffusion config: lambda must be >= 0");
  if (epochs < 1) throw ValidationError("diffusion config: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("diffusion config: learning rate must be > 0");
  if (batch_size < 2) throw ValidationError("diffusion config: batch size must be >= 2");
  if (steps < 1) throw ValidationError("diffusion config: steps must be >= 1");
  if (!(schedule_offset > 0.0)) throw ValidationError("diffusion config: offset must be > 0");
  if (!(feature_loss_weight > 0.0))
    throw ValidationError("diffusion config: feature loss weight must be > 0");
}

DiffusionLossParts diffusion_batch_loss(ad::Tape& tape, DenoiserTapeModel& model,
                                        const NoisyGraph& noisy, const Matrix& clean_adj,
                                        const Matrix& clean_features,
                                        const SensitivePartition& partition,
                                        const std::vector<int>& batch, int t, double lambda,
                                        double feature_weight) {
  if (batch.size() < 2) throw ValidationError("diffusion loss: batch needs >= 2 nodes");
  ad::Tensor repr = model.node_representations(noisy, partition.onehot, t);

  // feature CE, mean per channel over the batch rows
  std::vector<std::size_t> rows(batch.begin(), batch.end());
  Matrix x_targets(batch.size(), clean_features.cols());
  for (std::size_t r = 0; r < batch.size(); ++r)
    for (std::size_t f = 0; f < clean_features.cols(); ++f)
      x_targets(r, f) = clean_features(batch[r], f);
  ad::Tensor feat_ce = tape.scale(
      tape.sum(tape.sigmoid_ce(model.feature_logits(tape.gather_rows(repr, rows)), x_targets)),
      feature_weight / static_cast<double>(x_targets.size()));

  // edge CE, mean over the ordered batch pairs (i<j each carries both orders)
  std::vector<std::size_t> is, js;
  std::vector<Edge> pairs;
  for (std::size_t a = 0; a < batch.size(); ++a)
    for (std::size_t b = a + 1; b < batch.size(); ++b) {
      is.push_back(batch[a]);
      js.push_back(batch[b]);
      pairs.push_back(make_edge(batch[a], batch[b]));
    }
  ad::Tensor edge_logits = model.edge_logits(repr, is, js);
  Matrix e_targets(pairs.size(), 1);
  for (std::size_t m = 0; m < pairs.size(); ++m)
    e_targets(m, 0) = clean_adj(is[m], js[m]) != 0.0 ? 1.0 : 0.0;
  ad::Tensor edge_ce = tape.scale(tape.sum(tape.sigmoid_ce(edge_logits, e_targets)),
                                  1.0 / static_cast<double>(pairs.size()));

  DiffusionLossParts parts;
  parts.feature_ce = feat_ce;
  parts.edge_ce = edge_ce;
  if (lambda > 0.0) {
    ad::Tensor probs = tape.sigmoid(edge_logits);
    parts.regularizer = batch_ratio_regularizer_pairs(tape, probs, pairs, partition);
    parts.total = tape.add(tape.add(feat_ce, edge_ce), tape.scale(parts.regularizer, lambda));
  } else {
    parts.regularizer = tape.constant_scalar(0.0);
    parts.total = tape.add(feat_ce, edge_ce);
  }
  return parts;
}

DiffusionTrainResult train_diffusion(const Graph& g, const DiffusionTrainConfig& config) {
  config.validate();
  g.validate();

  DenoiserSizes sizes = config.sizes;
  sizes.feature_dim = static_cast<int>(g.features.cols());
  sizes.n_groups = g.n_groups;
  sizes.validate();

  const Matrix clean_adj = g.adjacency();
  const Matrix clean_x = binarize_features(g.features);
  const SensitivePartition partition = SensitivePartition::from_graph(g);

  DiffusionTrainResult result;
  result.params = DenoiserParams::init(sizes, config.seed);
  result.params.schedule = build_schedule(config.steps, config.schedule_offset);
  result.params.channel_marginals = marginals(clean_adj, clean_x);
  result.params.group_distribution.assign(g.n_groups, 0.0);
  for (int s : g.sensitive) result.params.group_distribution[s] += 1.0 / g.n_nodes;

  Adam opt(config.learning_rate);
  auto named = result.params.named_parameters();
  std::vector<std::size_t> slots;
  for (auto& [name, m] : named) slots.push_back(opt.add_slot(m->size()));

  std::mt19937_64 rng(config.seed ^ 0xda3e39cb94b95bdbULL);
  std::uniform_int_distribution<int> t_draw(1, config.steps);
  std::vector<int> perm(g.n_nodes);
  std::iota(perm.begin(), perm.end(), 0);
  const int batch_size = std::min(config.batch_size, g.n_nodes);

  for (int step = 0; step < config.epochs; ++step) {
    const int t = t_draw(rng);
    const NoisyGraph noisy =
        forward_noise(clean_adj, clean_x, t, result.params.schedule,
                      result.params.channel_marginals, rng);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> batch(perm.begin(), perm.begin() + batch_size);
    std::sort(batch.begin(), batch.end());

    ad::Tape tape;
    DenoiserTapeModel model(tape, result.params, /*trainable=*/true);
    DiffusionLossParts parts =
        diffusion_batch_loss(tape, model, noisy, clean_adj, clean_x, partition, batch, t,
                             config.lambda, config.feature_loss_weight);
    const double loss = parts.total.scalar();
    if (!std::isfinite(loss))
      throw DivergenceError("train_diffusion: non-finite loss at step " + std::to_string(step));

    tape.backward(parts.total);
    opt.begin_step();
    const auto& tensors = model.parameter_tensors();
    for (std::size_t p = 0; p < named.size(); ++p)
      opt.update(slots[p], *named[p].second, tape.grad_of(tensors[p]));

    result.history.push_back({step, t, loss, parts.feature_ce.scalar(), parts.edge_ce.scalar(),
                              parts.regularizer.scalar()});
  }
  result.params.validate();
  return result;
}

// ---------------------------------------------------------------------------
// posterior and sampling

std::array<double, 2> posterior(const std::array<double, 2>& predicted, int x_t, int t,
                                const NoiseSchedule& schedule, const std::array<double, 2>& marginal,
                                bool* fell_back) {
  if (t < 1 || t > schedule.steps) throw ValidationError("posterior: t out of range");
  if (x_t != 0 && x_t != 1) throw ValidationError("posterior: label must be 0 or 1");
  const double psum = predicted[0] + predicted[1];
  if (!(std::abs(psum - 1.0) <= 1e-9) || predicted[0] < 0.0 || predicted[1] < 0.0)
    throw ValidationError("posterior: predicted distribution must be a probability vector");
  if (fell_back) *fell_back = false;

  const TransitionKernel q_t = TransitionKernel::uniform_mix(schedule.alpha_at(t), marginal);
  const TransitionKernel q_bar_t = TransitionKernel::uniform_mix(schedule.alpha_bar_at(t), marginal);
  const TransitionKernel q_bar_prev =
      TransitionKernel::uniform_mix(schedule.alpha_bar_at(t - 1), marginal);

  std::array<double, 2> out{0.0, 0.0};
  for (int e = 0; e < 2; ++e) {
    const double denom = q_bar_t.q[e][x_t];  // q(x_t | x_0 = e)
    if (denom <= 0.0) continue;              // impossible conditioning: term drops
    for (int x_prev = 0; x_prev < 2; ++x_prev) {
      const double w = q_t.q[x_prev][x_t] * q_bar_prev.q[e][x_prev] / denom;
      out[x_prev] += predicted[e] * w;
    }
  }
  const double total = out[0] + out[1];
  if (total <= 0.0) {
    // every branch was impossible under the predicted labels
    if (fell_back) *fell_back = true;
    return marginal;
  }
  out[0] /= total;
  out[1] /= total;
  return out;
}

std::vector<int> sample_sensitive(const std::vector<double>& group_distribution, int n_nodes,
                                  std::mt19937_64& rng) {
  if (group_distribution.empty()) throw ValidationError("sample: group distribution empty");
  double total = 0.0;
  for (double p : group_distribution) {
    if (!(p >= 0.0)) throw ValidationError("sample: group probabilities must be >= 0");
    total += p;
  }
  if (!(std::abs(total - 1.0) <= 1e-6))
    throw ValidationError("sample: group distribution must sum to 1");
  const int k = static_cast<int>(group_distribution.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> labels(n_nodes);
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n_nodes; ++i) {
      double u = unif(rng), acc = 0.0;
      int chosen = k - 1;
      for (int kk = 0; kk < k; ++kk) {
        acc += group_distribution[kk];
        if (u < acc) {
          chosen = kk;
          break;
        }
      }
      labels[i] = chosen;
      ++counts[chosen];
    }
    if (std::all_of(counts.begin(), counts.end(), [](int c) { return c > 0; })) return labels;
  }
  throw SizingError("sample: could not draw a sensitive assignment covering every group");
}

Graph sample_graph_with_sensitive(const DenoiserParams& params, const std::vector<int>& sensitive,
                                  int n_groups, std::mt19937_64& rng) {
  params.validate();
  if (params.schedule.steps < 1) throw ValidationError("sample: params carry no schedule");
  const int n = static_cast<int>(sensitive.size());
  if (n < 2) throw ValidationError("sample: need at least 2 nodes");
  const SensitivePartition partition = SensitivePartition::from_labels(sensitive, n_groups);
  const NoiseSchedule& sched = params.schedule;
  const ChannelMarginals& m = params.channel_marginals;
  if (static_cast<int>(m.feature.size()) != params.sizes.feature_dim)
    throw ValidationError("sample: marginals do not match the model");

  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // initialize from the channel marginals
  NoisyGraph state;
  state.t = sched.steps;
  state.adjacency = Matrix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const int v = unif(rng) < m.edge[1] ? 1 : 0;
      state.adjacency(i, j) = v;
      state.adjacency(j, i) = v;
    }
  state.features = Matrix(n, params.sizes.feature_dim);
  for (int f = 0; f < params.sizes.feature_dim; ++f)
    for (int i = 0; i < n; ++i) state.features(i, f) = unif(rng) < m.feature[f][1] ? 1.0 : 0.0;
  state.neighbors = neighbors_of(state.adjacency);

  for (int t = sched.steps; t >= 1; --t) {
    state.t = t;
    const DenoisePrediction pred = denoise(state, partition, t, params);

    NoisyGraph next;
    next.t = t - 1;
    next.adjacency = Matrix(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double pe = pred.edge_probs.p(i, j);
        const auto post = posterior({1.0 - pe, pe}, state.adjacency(i, j) != 0.0 ? 1 : 0, t,
                                    sched, m.edge);
        const int v = unif(rng) < post[1] ? 1 : 0;
        next.adjacency(i, j) = v;
        next.adjacency(j, i) = v;
      }
    next.features = Matrix(n, params.sizes.feature_dim);
    for (int f = 0; f < params.sizes.feature_dim; ++f)
      for (int i = 0; i < n; ++i) {
        const double px = pred.feature_probs(i, f);
        const auto post = posterior({1.0 - px, px}, state.features(i, f) != 0.0 ? 1 : 0, t,
                                    sched, m.feature[f]);
        next.features(i, f) = unif(rng) < post[1] ? 1.0 : 0.0;
      }
    next.neighbors = neighbors_of(next.adjacency);
    state = std::move(next);
  }

  Graph out;
  out.n_nodes = n;
  out.n_groups = n_groups;
  out.sensitive = sensitive;
  out.synthetic_sensitive = true;
  out.features = state.features;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (state.adjacency(i, j) != 0.0) out.edges.push_back(Edge{i, j});
  out.validate();
  return out;
}

Graph sample_graph(const DenoiserParams& params, int n_nodes,
                   const std::vector<double>& group_distribution, std::mt19937_64& rng) {
  const std::vector<int> labels = sample_sensitive(group_distribution, n_nodes, rng);
  return sample_graph_with_sensitive(params, labels,
                                     static_cast<int>(group_distribution.size()), rng);
}

}  // namespace graphfair::diffusion
