#include <doctest.h>

#include <random>

#include "graphfair/fairness.hpp"
#include "testutil.hpp"

using namespace graphfair;
using testutil::rand_labels;
using testutil::rand_symmetric;

namespace {

// Block-constant probability matrix that hits the optimal mass targets for
// total mass e: intra block value for group k scaled so the ordered intra
// mass equals e*|S_k|^2/N^2, inter blocks at e/N^2.
Matrix targets_matrix(const SensitivePartition& partition, double e) {
  const int n = partition.n_nodes;
  Matrix p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (partition.labels[i] == partition.labels[j]) {
        const double sk = partition.group_sizes[partition.labels[i]];
        p(i, j) = e * sk / (static_cast<double>(n) * n * (sk - 1.0));
      } else {
        p(i, j) = e / (static_cast<double>(n) * n);
      }
    }
  return p;
}

SensitivePartition random_partition_multi(int n, int k, std::mt19937_64& rng) {
  // every group needs >= 2 members so intra pairs exist
  for (;;) {
    auto labels = rand_labels(n, k, rng);
    auto partition = SensitivePartition::from_labels(labels, k);
    bool ok = true;
    for (int c : partition.group_sizes) ok = ok && c >= 2;
    if (ok) return partition;
  }
}

}  // namespace

TEST_SUITE_BEGIN("fairness");

TEST_CASE("delta_sp of a constant matrix is zero") {
  Matrix p(6, 6, 0.5);
  for (int i = 0; i < 6; ++i) p(i, i) = 0.0;
  const auto partition = SensitivePartition::from_labels({0, 0, 0, 1, 1, 1}, 2);
  CHECK(delta_sp(EdgeProbMatrix::from_matrix(p), partition) == doctest::Approx(0.0));
}

TEST_CASE("delta_sp of extreme segregation is one") {
  Matrix p(4, 4);
  const std::vector<int> labels{0, 0, 1, 1};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j && labels[i] == labels[j]) p(i, j) = 1.0;
  const auto partition = SensitivePartition::from_labels(labels, 2);
  CHECK(delta_sp(EdgeProbMatrix::from_matrix(p), partition) == doctest::Approx(1.0));
}

TEST_CASE("delta_sp with a single group is an undefined-metric error") {
  Matrix p(3, 3, 0.5);
  for (int i = 0; i < 3; ++i) p(i, i) = 0.0;
  const auto partition = SensitivePartition::from_labels({0, 0, 0}, 1);
  CHECK_THROWS_AS(delta_sp(EdgeProbMatrix::from_matrix(p), partition), MetricError);
}

TEST_CASE("delta_sp matches the pair-enumeration oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + trial % 5;  // up to 8
    const Matrix p = rand_symmetric(n, rng);
    const auto partition = random_partition_multi(n, 2, rng);
    const double got = delta_sp(EdgeProbMatrix::from_matrix(p), partition);
    CHECK(got == doctest::Approx(testutil::oracle_delta_sp(p, partition.labels)).epsilon(1e-12));
  }
}

TEST_CASE("delta_eo of the truth adjacency is zero") {
  const Graph g = sbm_generate({5, 5}, 0.6, 0.3, 2, 3);
  const auto partition = SensitivePartition::from_graph(g);
  CHECK(delta_eo(EdgeProbMatrix::from_graph(g), g, partition) == doctest::Approx(0.0));
}

TEST_CASE("delta_eo with constant conditional scores") {
  const std::vector<int> labels{0, 0, 1, 1};
  Graph g;
  g.n_nodes = 4;
  g.n_groups = 2;
  g.sensitive = labels;
  g.features = Matrix(4, 1);
  g.edges = {{0, 1}, {0, 2}, {2, 3}};
  Matrix p(4, 4);
  for (const Edge& e : g.edges) {
    const double v = labels[e.u] == labels[e.v] ? 0.9 : 0.1;
    p(e.u, e.v) = v;
    p(e.v, e.u) = v;
  }
  const auto partition = SensitivePartition::from_labels(labels, 2);
  CHECK(delta_eo(EdgeProbMatrix::from_matrix(p), g, partition) == doctest::Approx(0.8));
}

TEST_CASE("delta_eo without true inter edges is a metric error") {
  const Graph g = sbm_generate({5, 5}, 1.0, 0.0, 2, 3);
  const auto partition = SensitivePartition::from_graph(g);
  CHECK_THROWS_AS(delta_eo(EdgeProbMatrix::from_graph(g), g, partition), MetricError);
}

TEST_CASE("delta_eo matches the brute-force oracle") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + trial % 4;
    const Matrix p = rand_symmetric(n, rng);
    const auto partition = random_partition_multi(n, 2, rng);
    Graph g;
    g.n_nodes = n;
    g.n_groups = 2;
    g.sensitive = partition.labels;
    g.features = Matrix(n, 1);
    bool has_intra = false, has_inter = false;
    std::mt19937_64 erng(trial);
    std::uniform_int_distribution<int> bit(0, 1);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (bit(erng)) {
          g.edges.push_back({i, j});
          (partition.labels[i] == partition.labels[j] ? has_intra : has_inter) = true;
        }
    if (!has_intra || !has_inter) continue;
    const double got = delta_eo(EdgeProbMatrix::from_matrix(p), g, partition);
    CHECK(got == doctest::Approx(testutil::oracle_delta_eo(p, g.adjacency(), partition.labels))
                     .epsilon(1e-12));
  }
}

TEST_CASE("metrics are invariant under group relabeling") {
  std::mt19937_64 rng(41);
  const int n = 7, k = 3;
  const Matrix p = rand_symmetric(n, rng);
  const auto partition = random_partition_multi(n, k, rng);
  std::vector<int> permuted(partition.labels);
  for (int& l : permuted) l = (l + 1) % k;  // cyclic relabeling
  const auto partition2 = SensitivePartition::from_labels(permuted, k);
  const auto prob = EdgeProbMatrix::from_matrix(p);
  CHECK(delta_sp(prob, partition) == doctest::Approx(delta_sp(prob, partition2)).epsilon(1e-12));
}

TEST_CASE("optimal targets reproduce the closed form") {
  const auto partition =
      SensitivePartition::from_labels({0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, 2);
  const OptimalTargets t = optimal_targets(20.0, partition);
  CHECK(t.intra[0] == doctest::Approx(5.0));
  CHECK(t.inter[0] == doctest::Approx(5.0));
}

TEST_CASE("optimal targets at the single-group boundary") {
  const auto partition = SensitivePartition::from_labels({0, 0, 0}, 1);
  const OptimalTargets t = optimal_targets(8.0, partition);
  CHECK(t.intra[0] == doctest::Approx(8.0));
  CHECK(t.inter[0] == doctest::Approx(0.0));
}

TEST_CASE("target ratio identity and per-group total") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 6 + trial % 7;
    const int k = 2 + trial % 3;
    const auto partition = SensitivePartition::from_labels(rand_labels(n, k, rng), k);
    const double e = 1.0 + 10.0 * trial;
    const OptimalTargets t = optimal_targets(e, partition);
    for (int g = 0; g < k; ++g) {
      const double sk = partition.group_sizes[g];
      CHECK(t.intra[g] + t.inter[g] == doctest::Approx(e * sk / n).epsilon(1e-12));
      if (sk < n)
        CHECK(t.intra[g] / t.inter[g] == doctest::Approx(sk / (n - sk)).epsilon(1e-10));
    }
  }
}

TEST_CASE("alpha terms vanish at the optimal targets") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 8 + trial % 6, k = 2 + trial % 2;
    const auto partition = random_partition_multi(n, k, rng);
    const double e = 4.0;  // keeps block values inside [0,1]
    const auto prob = EdgeProbMatrix::from_matrix(targets_matrix(partition, e));
    const auto mass = group_edge_mass(prob, partition);
    const AlphaTerms a = alpha_terms(mass, partition);
    for (int g = 0; g < k; ++g) {
      CHECK(a.alpha1[g] == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(a.alpha2[g] == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("alpha terms plug-in value") {
  const auto partition = SensitivePartition::from_labels({0, 0, 1, 1}, 2);
  GroupEdgeMass mass;
  mass.intra = {2.0, 0.0};
  mass.inter = {1.0, 0.0};
  mass.total = 6.0;
  const AlphaTerms a = alpha_terms(mass, partition);
  CHECK(a.alpha1[0] == doctest::Approx(0.5));
  CHECK(a.alpha2[0] == doctest::Approx(0.5));
}

TEST_CASE("alpha terms are homogeneous of degree one") {
  std::mt19937_64 rng(51);
  const auto partition = random_partition_multi(9, 3, rng);
  const Matrix p = rand_symmetric(9, rng, 0.0, 0.5);
  const auto mass = group_edge_mass(EdgeProbMatrix::from_matrix(p), partition);
  GroupEdgeMass scaled = mass;
  const double c = 3.7;
  for (double& v : scaled.intra) v *= c;
  for (double& v : scaled.inter) v *= c;
  scaled.total *= c;
  const AlphaTerms a = alpha_terms(mass, partition);
  const AlphaTerms b = alpha_terms(scaled, partition);
  for (std::size_t g = 0; g < a.alpha1.size(); ++g) {
    CHECK(b.alpha1[g] == doctest::Approx(c * a.alpha1[g]).epsilon(1e-10));
    CHECK(b.alpha2[g] == doctest::Approx(c * a.alpha2[g]).epsilon(1e-10));
  }
}

TEST_CASE("full regularizer is zero exactly at the targets") {
  std::mt19937_64 rng(53);
  const auto partition = random_partition_multi(10, 2, rng);
  const double e = 5.0;
  const auto prob = EdgeProbMatrix::from_matrix(targets_matrix(partition, e));
  CHECK(mass_target_regularizer(prob, partition, e) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("full regularizer of the zero matrix sums the targets") {
  const auto partition =
      SensitivePartition::from_labels({0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, 2);
  const auto prob = EdgeProbMatrix::from_matrix(Matrix(10, 10));
  // reference mass 20, equal groups of 5: per group |0-5| + |0-5| = 10
  CHECK(mass_target_regularizer(prob, partition, 20.0) == doctest::Approx(20.0));
}

TEST_CASE("full regularizer gradient matches finite differences") {
  std::mt19937_64 rng(59);
  const int n = 6;
  const Matrix p = rand_symmetric(n, rng, 0.05, 0.95);
  const auto partition = random_partition_multi(n, 2, rng);
  auto res = testutil::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& params) {
        return mass_target_regularizer(t, params[0], partition, 7.0);
      },
      {p});
  CHECK(res.ok);
  CHECK(res.max_rel < 1e-5);
}

TEST_CASE("full regularizer gradient reaches every off-diagonal entry") {
  std::mt19937_64 rng(60);
  const int n = 6;
  const Matrix p = rand_symmetric(n, rng, 0.05, 0.95);
  const auto partition = random_partition_multi(n, 2, rng);
  ad::Tape tape;
  ad::Tensor pt = tape.parameter(p);
  tape.backward(mass_target_regularizer(tape, pt, partition, 7.0));
  const Matrix g = tape.grad_of(pt);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j)
        CHECK(g(i, j) == 0.0);
      else
        CHECK(g(i, j) != 0.0);
    }
}

TEST_CASE("batch regularizer hand example") {
  // 4-node batch, groups [0,0,1,1], intra prob 1, inter 0:
  // per group |2/2 - 0/2| = 1, total 2
  const std::vector<int> labels{0, 0, 1, 1};
  Matrix p(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j && labels[i] == labels[j]) p(i, j) = 1.0;
  const auto partition = SensitivePartition::from_labels(labels, 2);
  const auto prob = EdgeProbMatrix::from_matrix(p);
  CHECK(batch_ratio_regularizer(prob, partition, {0, 1, 2, 3}) == doctest::Approx(2.0));
}

TEST_CASE("batch regularizer is zero at the size ratio") {
  // groups of sizes 2 and 4. With intra-0 entries x0, intra-1 entries y and
  // inter entries z, the per-group ratio conditions intra/|S_k| =
  // inter/(N-|S_k|) read x0 = 2z and y = 4z/3.
  const std::vector<int> labels{0, 0, 1, 1, 1, 1};
  const auto partition = SensitivePartition::from_labels(labels, 2);
  const double z = 0.15, x0 = 2.0 * z, y = 4.0 * z / 3.0;
  Matrix p(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (i == j) continue;
      if (labels[i] != labels[j])
        p(i, j) = z;
      else
        p(i, j) = labels[i] == 0 ? x0 : y;
    }
  const auto prob = EdgeProbMatrix::from_matrix(p);
  const std::vector<int> batch{0, 1, 2, 3, 4, 5};
  CHECK(batch_ratio_regularizer(prob, partition, batch) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("batch regularizer rejects tiny batches") {
  const auto partition = SensitivePartition::from_labels({0, 1}, 2);
  const auto prob = EdgeProbMatrix::from_matrix(Matrix(2, 2));
  CHECK_THROWS_AS(batch_ratio_regularizer(prob, partition, {0}), ValidationError);
}

TEST_CASE("batch regularizer gradient matches finite differences") {
  std::mt19937_64 rng(61);
  const int n = 6;
  const Matrix p = rand_symmetric(n, rng, 0.05, 0.95);
  const auto partition = random_partition_multi(n, 2, rng);
  const std::vector<int> batch{0, 1, 2, 4};
  auto res = testutil::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& params) {
        return batch_ratio_regularizer(t, params[0], partition, batch);
      },
      {p});
  CHECK(res.ok);
  CHECK(res.max_rel < 1e-5);
}

TEST_CASE("the three regularizer forms agree") {
  std::mt19937_64 rng(67);
  const int n = 7;
  const Matrix p = rand_symmetric(n, rng, 0.05, 0.95);
  const auto partition = random_partition_multi(n, 2, rng);
  const std::vector<int> batch{0, 2, 3, 5, 6};
  const double plain = batch_ratio_regularizer(EdgeProbMatrix::from_matrix(p), partition, batch);

  ad::Tape tape;
  const double full_nn = batch_ratio_regularizer(tape, tape.constant(p), partition, batch).scalar();

  Matrix block(batch.size(), batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r)
    for (std::size_t c = 0; c < batch.size(); ++c) block(r, c) = p(batch[r], batch[c]);
  const double block_v =
      batch_ratio_regularizer_block(tape, tape.constant(block), batch, partition).scalar();

  std::vector<Edge> pairs;
  std::vector<double> pp;
  for (std::size_t r = 0; r < batch.size(); ++r)
    for (std::size_t c = r + 1; c < batch.size(); ++c) {
      pairs.push_back(make_edge(batch[r], batch[c]));
      pp.push_back(p(batch[r], batch[c]));
    }
  Matrix pv(pp.size(), 1);
  for (std::size_t i = 0; i < pp.size(); ++i) pv(i, 0) = pp[i];
  const double pairs_v =
      batch_ratio_regularizer_pairs(tape, tape.constant(pv), pairs, partition).scalar();

  CHECK(full_nn == doctest::Approx(plain).epsilon(1e-12));
  CHECK(block_v == doctest::Approx(plain).epsilon(1e-12));
  CHECK(pairs_v == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("theorem-1 bound trivial plug-ins") {
  const auto partition = SensitivePartition::from_labels({0, 0, 1, 1}, 2);
  BoundParams bp;
  bp.lipschitz = 1.0;
  bp.feature_bound = 1.0;
  bp.hidden_dim = 4;
  bp.deviation = 0.0;
  GroupEdgeMass mass;  // alpha1 + alpha2 = 0.5 for group 0 via plug-in masses
  mass.intra = {2.0, 2.0};
  mass.inter = {1.0, 1.0};
  mass.total = 6.0;
  const AlphaTerms a = alpha_terms(mass, partition);
  const auto bounds = theorem1_bound(mass, bp, partition);
  for (int g = 0; g < 2; ++g)
    CHECK(bounds[g] ==
          doctest::Approx(2.0 * (a.alpha1[g] + a.alpha2[g])).epsilon(1e-12));  // sqrt(4)=2
  // vanishing terms: zero alphas and zero deviation give a zero bound
  GroupEdgeMass zero_mass;
  zero_mass.intra = {0.0, 0.0};
  zero_mass.inter = {0.0, 0.0};
  zero_mass.total = 0.0;
  for (double b : theorem1_bound(zero_mass, bp, partition)) CHECK(b == doctest::Approx(0.0));
}

TEST_CASE("theorem-1 bound is linear in the alpha sum") {
  const auto partition = SensitivePartition::from_labels({0, 0, 1, 1}, 2);
  BoundParams bp;
  bp.hidden_dim = 3;
  bp.deviation = 0.0;
  GroupEdgeMass mass;
  mass.intra = {2.0, 2.0};
  mass.inter = {1.0, 1.0};
  mass.total = 6.0;
  GroupEdgeMass doubled = mass;
  for (double& v : doubled.intra) v *= 2.0;
  for (double& v : doubled.inter) v *= 2.0;
  doubled.total *= 2.0;
  const auto b1 = theorem1_bound(mass, bp, partition);
  const auto b2 = theorem1_bound(doubled, bp, partition);
  for (int g = 0; g < 2; ++g) CHECK(b2[g] == doctest::Approx(2.0 * b1[g]).epsilon(1e-10));
}

TEST_CASE("empirical theorem-1 dominance on homophilous stochastic matrices") {
  std::mt19937_64 rng(71);
  int done = 0;
  while (done < 200) {
    const int n = 10 + static_cast<int>(rng() % 41);
    const int k = 2 + static_cast<int>(rng() % 2);
    const int f = 4 + static_cast<int>(rng() % 5);  // keep F <= N
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = i % k;  // balanced groups
    const auto partition = SensitivePartition::from_labels(labels, k);
    std::uniform_real_distribution<double> intra_d(0.4, 0.8), inter_d(0.01, 0.08);
    Matrix p(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double v = labels[i] == labels[j] ? intra_d(rng) : inter_d(rng);
        p(i, j) = v;
        p(j, i) = v;
      }
    const auto prob = EdgeProbMatrix::from_matrix(p);
    const Matrix c = testutil::rand_matrix(n, f, rng);
    const auto flags = check_assumptions(prob, partition, c, 1.0);
    if (!flags.a2 || !flags.a3) continue;  // resample: the check needs A2-A3
    ++done;

    const Matrix h = expected_relu_aggregation(prob, c);
    const auto disparities = group_mean_disparities(h, partition);
    const BoundParams bp = bound_params_for_aggregation(prob, c);
    const auto mass = group_edge_mass(prob, partition);
    const auto bounds = theorem1_bound(mass, bp, partition);
    for (int g = 0; g < k; ++g) CHECK(disparities[g] <= bounds[g] + 1e-9);
  }
}

TEST_CASE("proposition-1 bound plug-ins") {
  const auto partition = SensitivePartition::from_labels({0, 0, 1, 1}, 2);
  BoundParams bp;
  CHECK(prop1_bound({0.0, 0.0}, bp, partition) == doctest::Approx(0.0));
  CHECK(prop1_bound({0.2, 0.4}, bp, partition) == doctest::Approx(0.3));
  CHECK_THROWS_AS(prop1_bound({-0.1, 0.0}, bp, partition), ValidationError);
}

TEST_CASE("proposition-1 dominance over the bilinear score gap") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 6 + static_cast<int>(rng() % 20);
    const int k = 2 + static_cast<int>(rng() % 3);
    const int d = 2 + static_cast<int>(rng() % 6);
    const auto partition = SensitivePartition::from_labels(rand_labels(n, k, rng), k);
    const Matrix h = testutil::rand_matrix(n, d, rng, -2.0, 2.0);
    BoundParams bp;
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
      double norm = 0.0;
      for (int f = 0; f < d; ++f) norm += h(i, f) * h(i, f);
      q = std::max(q, std::sqrt(norm));
    }
    bp.embed_norm = q;
    bp.decoder_norm = 1.0;
    const double gap = bilinear_score_gap(h, partition);
    const double bound = prop1_bound(group_mean_disparities(h, partition), bp, partition);
    CHECK(gap <= bound + 1e-9);
  }
}

TEST_CASE("assumption checks on a homophilous SBM") {
  const Graph g = sbm_generate({40, 40}, 0.5, 0.01, 4, 5);
  const auto partition = SensitivePartition::from_graph(g);
  const Matrix c(g.n_nodes, 3, 0.5);
  const auto flags = check_assumptions(EdgeProbMatrix::from_graph(g), partition, c, 0.5);
  CHECK(flags.a1);
  CHECK(flags.a2);
  CHECK(flags.a3);
}

TEST_CASE("a cross-group star hub violates A2") {
  // hub node 0 in group 0 whose neighbors are all in group 1
  Graph g;
  g.n_nodes = 8;
  g.n_groups = 2;
  g.sensitive = {0, 0, 0, 0, 1, 1, 1, 1};
  g.features = Matrix(8, 1);
  g.edges = {{0, 4}, {0, 5}, {0, 6}, {0, 7}};
  const auto partition = SensitivePartition::from_graph(g);
  const auto flags =
      check_assumptions(EdgeProbMatrix::from_graph(g), partition, Matrix(8, 1, 0.1), 1.0);
  CHECK_FALSE(flags.a2);
  CHECK(flags.a2_worst_node == 0);
}

TEST_CASE("A1 holds by construction at the measured norm") {
  std::mt19937_64 rng(79);
  const Matrix c = testutil::rand_matrix(5, 4, rng, -3.0, 3.0);
  double max_inf = 0.0;
  for (double v : c.data()) max_inf = std::max(max_inf, std::abs(v));
  const auto partition = SensitivePartition::from_labels({0, 0, 1, 1, 1}, 2);
  const auto prob = EdgeProbMatrix::from_matrix(rand_symmetric(5, rng));
  const auto flags = check_assumptions(prob, partition, c, max_inf);
  CHECK(flags.a1);
  CHECK(flags.a1_max_norm == doctest::Approx(max_inf));
}

TEST_SUITE_END();
