#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "graphfair/graph.hpp"
#include "testutil.hpp"

using namespace graphfair;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() /
          ("graphfair_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_SUITE_BEGIN("graph");

TEST_CASE("load_graph reads the three-file layout") {
  TempDir tmp;
  const auto edges = tmp.file("e.txt", "0 1\n1 2\n");
  const auto feats = tmp.file("x.csv", "1.0,0.5\n0.0,1.5\n2.0,0.25\n");
  const auto sens = tmp.file("s.txt", "0\n0\n1\n");
  const Graph g = load_graph(edges, feats, sens);
  CHECK(g.n_nodes == 3);
  CHECK(g.edges.size() == 2);
  CHECK(g.n_groups == 2);
  const auto partition = SensitivePartition::from_graph(g);
  CHECK(partition.group_sizes == std::vector<int>{2, 1});
  CHECK(g.features(2, 1) == 0.25);
}

TEST_CASE("self loops are dropped and counted") {
  TempDir tmp;
  const auto edges = tmp.file("e.txt", "0 0\n0 1\n1 2\n");
  const auto feats = tmp.file("x.csv", "1\n2\n3\n");
  const auto sens = tmp.file("s.txt", "0\n1\n1\n");
  LoadStats stats;
  const Graph g = load_graph(edges, feats, sens, &stats);
  CHECK(g.edges.size() == 2);
  CHECK(stats.self_loops_dropped == 1);
  CHECK_FALSE(g.has_edge(0, 0));
}

TEST_CASE("symmetric duplicates collapse") {
  TempDir tmp;
  const auto edges = tmp.file("e.txt", "0 1\n1 0\n2 1\n");
  const auto feats = tmp.file("x.csv", "1\n2\n3\n");
  const auto sens = tmp.file("s.txt", "0\n1\n1\n");
  LoadStats stats;
  const Graph g = load_graph(edges, feats, sens, &stats);
  CHECK(g.edges.size() == 2);
  CHECK(stats.duplicates_dropped == 1);
}

TEST_CASE("malformed edge line reports the line number") {
  TempDir tmp;
  const auto edges = tmp.file("e.txt", "0 1\n1 2 3\n");
  const auto feats = tmp.file("x.csv", "1\n2\n3\n");
  const auto sens = tmp.file("s.txt", "0\n1\n1\n");
  CHECK_THROWS_WITH_AS(load_graph(edges, feats, sens), doctest::Contains(":2"), ParseError);
}

TEST_CASE("a group label gap is a validation error") {
  TempDir tmp;
  const auto edges = tmp.file("e.txt", "0 1\n");
  const auto feats = tmp.file("x.csv", "1\n2\n3\n");
  const auto sens = tmp.file("s.txt", "0\n2\n2\n");  // group 1 missing
  CHECK_THROWS_AS(load_graph(edges, feats, sens), ValidationError);
}

TEST_CASE("citation-scale input validates") {
  // 2708 nodes, 5278 undirected edges, 1433 features, 7 groups
  TempDir tmp;
  const int n = 2708, f = 1433, k = 7, m = 5278;
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> node(0, n - 1);
  std::set<std::pair<int, int>> es;
  while (static_cast<int>(es.size()) < m) {
    int u = node(rng), v = node(rng);
    if (u == v) continue;
    es.insert({std::min(u, v), std::max(u, v)});
  }
  std::string edge_text;
  for (auto& [u, v] : es) edge_text += std::to_string(u) + " " + std::to_string(v) + "\n";
  std::string feat_text;
  feat_text.reserve(static_cast<std::size_t>(n) * f * 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < f; ++j) {
      feat_text += (j ? ",0" : "0");
    }
    feat_text += "\n";
  }
  std::string sens_text;
  for (int i = 0; i < n; ++i) sens_text += std::to_string(i % k) + "\n";
  const Graph g = load_graph(tmp.file("e.txt", edge_text), tmp.file("x.csv", feat_text),
                             tmp.file("s.txt", sens_text));
  CHECK(g.n_nodes == n);
  CHECK(g.edges.size() == static_cast<std::size_t>(m));
  CHECK(g.features.cols() == static_cast<std::size_t>(f));
  CHECK(g.n_groups == k);
}

TEST_CASE("sbm with degenerate probabilities") {
  const Graph g = sbm_generate({5, 5}, 1.0, 0.0, 3, 1);
  CHECK(g.edges.size() == 20);  // 2 * C(5,2)
  for (const Edge& e : g.edges) CHECK(g.sensitive[e.u] == g.sensitive[e.v]);
}

TEST_CASE("sbm empirical intra rate concentrates") {
  const Graph g = sbm_generate({100, 100, 100}, 0.3, 0.05, 4, 7);
  long intra_edges = 0;
  for (const Edge& e : g.edges)
    if (g.sensitive[e.u] == g.sensitive[e.v]) ++intra_edges;
  const double trials = 3.0 * 100.0 * 99.0 / 2.0;
  const double rate = static_cast<double>(intra_edges) / trials;
  const double sigma = std::sqrt(0.3 * 0.7 / trials);
  CHECK(std::fabs(rate - 0.3) < 3.0 * sigma);
}

TEST_CASE("sbm is deterministic under its seed") {
  const Graph a = sbm_generate({30, 30}, 0.2, 0.05, 4, 9);
  const Graph b = sbm_generate({30, 30}, 0.2, 0.05, 4, 9);
  CHECK(a.edges == b.edges);
  CHECK(a.features.data() == b.features.data());
}

TEST_CASE("sbm rejects bad inputs") {
  CHECK_THROWS_AS(sbm_generate({}, 0.5, 0.1, 3, 1), ValidationError);
  CHECK_THROWS_AS(sbm_generate({5, 0}, 0.5, 0.1, 3, 1), ValidationError);
  CHECK_THROWS_AS(sbm_generate({5, 5}, 1.5, 0.1, 3, 1), ValidationError);
}

TEST_CASE("split sizes follow the 80/10/10 rule") {
  Graph g = sbm_generate({6, 6}, 1.0, 0.0, 2, 3);  // 30 edges
  g.edges.resize(10);
  const EdgeSplit s = split_edges(g, 0.8, 5);
  CHECK(s.train_pos.size() == 8);
  CHECK(s.val_pos.size() == 1);
  CHECK(s.test_pos.size() == 1);
  CHECK(s.val_neg.size() == 1);
  CHECK(s.test_neg.size() == 1);
}

TEST_CASE("split is a partition of the edge set") {
  const Graph g = sbm_generate({12, 12}, 0.4, 0.1, 3, 11);
  const EdgeSplit s = split_edges(g, 0.7, 3);
  std::vector<Edge> all = s.train_pos;
  all.insert(all.end(), s.val_pos.begin(), s.val_pos.end());
  all.insert(all.end(), s.test_pos.begin(), s.test_pos.end());
  std::sort(all.begin(), all.end());
  CHECK(all == g.edges);
}

TEST_CASE("negatives never intersect the edge set over 100 trials") {
  const Graph g = sbm_generate({8, 8}, 0.5, 0.2, 2, 17);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const EdgeSplit s = split_edges(g, 0.8, seed);
    for (const Edge& e : s.val_neg) CHECK_FALSE(g.has_edge(e.u, e.v));
    for (const Edge& e : s.test_neg) CHECK_FALSE(g.has_edge(e.u, e.v));
    // and val/test negatives stay disjoint
    std::set<Edge> vn(s.val_neg.begin(), s.val_neg.end());
    for (const Edge& e : s.test_neg) CHECK(vn.count(e) == 0);
  }
}

TEST_CASE("split on a too-small graph raises a sizing error") {
  Graph g = sbm_generate({4, 4}, 1.0, 1.0, 2, 3);
  g.edges.resize(5);
  CHECK_THROWS_AS(split_edges(g, 0.9, 1), SizingError);  // round(4.5)=5 leaves nothing
}

TEST_CASE("group edge mass on the degenerate SBM") {
  const Graph g = sbm_generate({5, 5}, 1.0, 0.0, 3, 1);
  const auto partition = SensitivePartition::from_graph(g);
  const GroupEdgeMass m = group_edge_mass(EdgeProbMatrix::from_graph(g), partition);
  // each group is a complete K5: 10 undirected edges, 20 ordered pairs
  CHECK(m.intra[0] == doctest::Approx(20.0));
  CHECK(m.intra[1] == doctest::Approx(20.0));
  CHECK(m.inter[0] == 0.0);
  CHECK(m.inter[1] == 0.0);
  CHECK(m.total == doctest::Approx(40.0));
}

TEST_CASE("group edge mass of a constant matrix has the closed form") {
  const int n1 = 4, n2 = 7, n = n1 + n2;
  const double c = 0.37;
  Matrix p(n, n, c);
  for (int i = 0; i < n; ++i) p(i, i) = 0.0;
  std::vector<int> labels(n, 0);
  for (int i = n1; i < n; ++i) labels[i] = 1;
  const auto partition = SensitivePartition::from_labels(labels, 2);
  const GroupEdgeMass m = group_edge_mass(EdgeProbMatrix::from_matrix(p), partition);
  CHECK(m.intra[0] == doctest::Approx(c * n1 * (n1 - 1)).epsilon(1e-12));
  CHECK(m.intra[1] == doctest::Approx(c * n2 * (n2 - 1)).epsilon(1e-12));
  CHECK(m.inter[0] == doctest::Approx(c * n1 * (n - n1)).epsilon(1e-12));
  CHECK(m.inter[1] == doctest::Approx(c * n2 * (n - n2)).epsilon(1e-12));
}

TEST_CASE("group edge mass matches the brute-force oracle on random matrices") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6, k = 3;
    const Matrix p = testutil::rand_symmetric(n, rng);
    const auto labels = testutil::rand_labels(n, k, rng);
    const auto partition = SensitivePartition::from_labels(labels, k);
    const GroupEdgeMass m = group_edge_mass(EdgeProbMatrix::from_matrix(p), partition);
    const auto oracle = testutil::oracle_group_mass(p, labels, k);
    for (int g = 0; g < k; ++g) {
      CHECK(m.intra[g] == doctest::Approx(oracle.intra[g]).epsilon(1e-12));
      CHECK(m.inter[g] == doctest::Approx(oracle.inter[g]).epsilon(1e-12));
    }
    CHECK(m.total == doctest::Approx(oracle.total).epsilon(1e-12));
  }
}

TEST_CASE("mass consistency identity on random 8-node matrices") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix p = testutil::rand_symmetric(8, rng);
    const auto labels = testutil::rand_labels(8, 2 + trial % 2, rng);
    const auto partition = SensitivePartition::from_labels(labels, 2 + trial % 2);
    const GroupEdgeMass m = group_edge_mass(EdgeProbMatrix::from_matrix(p), partition);
    double intra_total = 0.0, inter_total = 0.0;
    for (double v : m.intra) intra_total += v;
    for (double v : m.inter) inter_total += v;
    // ordered pairs: every pair is intra for exactly one group or inter for
    // exactly one group, so the group masses tile the total exactly
    CHECK(intra_total + inter_total == doctest::Approx(m.total).epsilon(1e-12));
    for (std::size_t g = 0; g < m.intra.size(); ++g)
      CHECK(m.intra[g] + m.inter[g] <= m.total + 1e-12);
  }
}

TEST_CASE("asymmetric probability matrices are rejected") {
  Matrix p(3, 3, 0.2);
  p(0, 1) = 0.9;
  CHECK_THROWS_AS(EdgeProbMatrix::from_matrix(p), ValidationError);
}

TEST_CASE("graph container serialization round-trips bit-exactly") {
  TempDir tmp;
  const Graph g = sbm_generate({7, 9}, 0.4, 0.1, 5, 77);
  const std::string once = graph_to_string(g);
  save_graph(g, tmp.path("g.txt"));
  const Graph back = load_graph_container(tmp.path("g.txt"));
  CHECK(graph_to_string(back) == once);
  CHECK(back.edges == g.edges);
  CHECK(back.features.data() == g.features.data());
  CHECK(back.sensitive == g.sensitive);
}

TEST_CASE("split serialization round-trips") {
  TempDir tmp;
  const Graph g = sbm_generate({10, 10}, 0.5, 0.1, 3, 5);
  const EdgeSplit s = split_edges(g, 0.8, 13);
  save_split(s, tmp.path("s.txt"));
  const EdgeSplit back = load_split(tmp.path("s.txt"));
  CHECK(back.train_pos == s.train_pos);
  CHECK(back.val_pos == s.val_pos);
  CHECK(back.test_pos == s.test_pos);
  CHECK(back.val_neg == s.val_neg);
  CHECK(back.test_neg == s.test_neg);
  CHECK(back.seed == s.seed);
}

TEST_SUITE_END();
