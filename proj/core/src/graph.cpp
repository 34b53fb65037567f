#include "graphfair/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "graphfair/text_io.hpp"

namespace graphfair {

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  return in;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

void Graph::validate() const {
  if (n_nodes <= 0) throw ValidationError("graph: node count must be positive");
  if (n_groups < 2) throw ValidationError("graph: needs at least 2 sensitive groups");
  if (static_cast<int>(sensitive.size()) != n_nodes)
    throw ValidationError("graph: sensitive label count != node count");
  if (features.rows() != static_cast<std::size_t>(n_nodes))
    throw ValidationError("graph: feature row count != node count");
  std::vector<int> counts(n_groups, 0);
  for (int s : sensitive) {
    if (s < 0 || s >= n_groups)
      throw ValidationError("graph: sensitive label " + std::to_string(s) + " out of range");
    ++counts[s];
  }
  for (int k = 0; k < n_groups; ++k)
    if (counts[k] == 0)
      throw ValidationError("graph: group " + std::to_string(k) + " has no members");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (e.u >= e.v) throw ValidationError("graph: edge not canonical or self loop");
    if (e.u < 0 || e.v >= n_nodes) throw ValidationError("graph: edge endpoint out of range");
    if (i > 0 && !(edges[i - 1] < e)) throw ValidationError("graph: edges not sorted unique");
  }
}

void Graph::canonicalize() {
  for (Edge& e : edges) e = make_edge(e.u, e.v);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

bool Graph::has_edge(int a, int b) const {
  if (a == b) return false;
  return std::binary_search(edges.begin(), edges.end(), make_edge(a, b));
}

std::vector<int> Graph::degrees() const {
  std::vector<int> d(n_nodes, 0);
  for (const Edge& e : edges) {
    ++d[e.u];
    ++d[e.v];
  }
  return d;
}

std::vector<std::vector<int>> Graph::neighbor_lists() const {
  return neighbor_lists_from_edges(n_nodes, edges);
}

Matrix Graph::adjacency() const { return adjacency_from_edges(n_nodes, edges); }

Matrix adjacency_from_edges(int n_nodes, const std::vector<Edge>& edges) {
  Matrix a(n_nodes, n_nodes);
  for (const Edge& e : edges) {
    a(e.u, e.v) = 1.0;
    a(e.v, e.u) = 1.0;
  }
  return a;
}

std::vector<std::vector<int>> neighbor_lists_from_edges(int n_nodes,
                                                        const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> nb(n_nodes);
  for (const Edge& e : edges) {
    nb[e.u].push_back(e.v);
    nb[e.v].push_back(e.u);
  }
  return nb;
}

// ---------------------------------------------------------------------------
// SensitivePartition

SensitivePartition SensitivePartition::from_labels(const std::vector<int>& labels, int n_groups) {
  if (n_groups < 1) throw ValidationError("partition: group count must be positive");
  SensitivePartition p;
  p.n_nodes = static_cast<int>(labels.size());
  p.n_groups = n_groups;
  p.labels = labels;
  p.onehot = Matrix(labels.size(), n_groups);
  p.group_sizes.assign(n_groups, 0);
  p.group_members.assign(n_groups, {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int k = labels[i];
    if (k < 0 || k >= n_groups)
      throw ValidationError("partition: label " + std::to_string(k) + " out of range");
    p.onehot(i, k) = 1.0;
    ++p.group_sizes[k];
    p.group_members[k].push_back(static_cast<int>(i));
  }
  return p;
}

SensitivePartition SensitivePartition::from_graph(const Graph& g) {
  return from_labels(g.sensitive, g.n_groups);
}

// ---------------------------------------------------------------------------
// EdgeProbMatrix

EdgeProbMatrix EdgeProbMatrix::from_matrix(Matrix m) {
  if (m.rows() != m.cols()) throw ValidationError("edge probabilities: matrix must be square");
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (m(i, j) != m(j, i))
        throw ValidationError("edge probabilities: matrix is not symmetric at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
    }
    m(i, i) = 0.0;
  }
  for (double v : m.data())
    if (!(v >= 0.0 && v <= 1.0))
      throw ValidationError("edge probabilities: entry outside [0,1]");
  return EdgeProbMatrix{std::move(m)};
}

EdgeProbMatrix EdgeProbMatrix::from_graph(const Graph& g) {
  return EdgeProbMatrix{g.adjacency()};
}

// ---------------------------------------------------------------------------
// loading

Graph load_graph(const std::string& edge_file, const std::string& feature_file,
                 const std::string& sensitive_file, LoadStats* stats) {
  Graph g;

  // features: dense CSV, row i = node i
  {
    std::ifstream in = open_or_throw(feature_file);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      ++lineno;
      auto t = io::trim(line);
      if (t.empty()) continue;
      auto cells = io::split_char(t, ',');
      std::vector<double> row;
      row.reserve(cells.size());
      for (auto c : cells)
        row.push_back(io::parse_double(io::trim(c), feature_file + ":" + std::to_string(lineno)));
      if (!rows.empty() && row.size() != rows.front().size())
        throw ParseError(feature_file + ":" + std::to_string(lineno) +
                         ": inconsistent column count");
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(feature_file + ": no feature rows");
    g.n_nodes = static_cast<int>(rows.size());
    g.features = Matrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j) g.features(i, j) = rows[i][j];
  }

  // sensitive labels: one integer per line
  {
    std::ifstream in = open_or_throw(sensitive_file);
    std::string line;
    std::size_t lineno = 0;
    int max_label = -1;
    while (std::getline(in, line)) {
      ++lineno;
      auto t = io::trim(line);
      if (t.empty()) continue;
      const long s = io::parse_long(t, sensitive_file + ":" + std::to_string(lineno));
      if (s < 0)
        throw ValidationError(sensitive_file + ":" + std::to_string(lineno) +
                              ": negative group label");
      g.sensitive.push_back(static_cast<int>(s));
      max_label = std::max(max_label, static_cast<int>(s));
    }
    if (static_cast<int>(g.sensitive.size()) != g.n_nodes)
      throw ValidationError("sensitive file has " + std::to_string(g.sensitive.size()) +
                            " labels for " + std::to_string(g.n_nodes) + " nodes");
    g.n_groups = max_label + 1;
  }

  // edges: "u v" per line; symmetric duplicates collapse, self loops drop
  {
    std::ifstream in = open_or_throw(edge_file);
    std::string line;
    std::size_t lineno = 0;
    int self_loops = 0;
    std::vector<Edge> raw;
    while (std::getline(in, line)) {
      ++lineno;
      auto t = io::trim(line);
      if (t.empty()) continue;
      auto tok = io::split_ws(t);
      if (tok.size() != 2)
        throw ParseError(edge_file + ":" + std::to_string(lineno) +
                         ": expected 'u v', got '" + std::string(t) + "'");
      const long u = io::parse_long(tok[0], edge_file + ":" + std::to_string(lineno));
      const long v = io::parse_long(tok[1], edge_file + ":" + std::to_string(lineno));
      if (u < 0 || v < 0 || u >= g.n_nodes || v >= g.n_nodes)
        throw ValidationError(edge_file + ":" + std::to_string(lineno) +
                              ": node index out of range");
      if (u == v) {
        ++self_loops;
        continue;
      }
      raw.push_back(make_edge(static_cast<int>(u), static_cast<int>(v)));
    }
    std::sort(raw.begin(), raw.end());
    const std::size_t before = raw.size();
    raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
    g.edges = std::move(raw);
    if (stats) {
      stats->self_loops_dropped = self_loops;
      stats->duplicates_dropped = static_cast<int>(before - g.edges.size());
    }
  }

  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// SBM generation

Graph sbm_generate(const std::vector<int>& group_sizes, double intra_p, double inter_p,
                   int feature_dim, std::uint64_t seed) {
  if (group_sizes.empty()) throw ValidationError("sbm: group sizes must be nonempty");
  for (int s : group_sizes)
    if (s <= 0) throw ValidationError("sbm: every group size must be positive");
  if (!(intra_p >= 0.0 && intra_p <= 1.0) || !(inter_p >= 0.0 && inter_p <= 1.0))
    throw ValidationError("sbm: probabilities must lie in [0,1]");
  if (feature_dim < 1) throw ValidationError("sbm: feature dimension must be positive");

  Graph g;
  g.n_groups = static_cast<int>(group_sizes.size());
  for (int k = 0; k < g.n_groups; ++k)
    g.sensitive.insert(g.sensitive.end(), group_sizes[k], k);
  g.n_nodes = static_cast<int>(g.sensitive.size());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < g.n_nodes; ++i)
    for (int j = i + 1; j < g.n_nodes; ++j) {
      const double p = g.sensitive[i] == g.sensitive[j] ? intra_p : inter_p;
      if (unif(rng) < p) g.edges.push_back(Edge{i, j});
    }

  // Group-dependent means keep features correlated with the sensitive
  // attribute; the noise scale leaves room for individual variation.
  std::normal_distribution<double> noise(0.0, 1.0);
  g.features = Matrix(g.n_nodes, feature_dim);
  for (int i = 0; i < g.n_nodes; ++i)
    for (int f = 0; f < feature_dim; ++f) {
      const double mean = (f % g.n_groups) == g.sensitive[i] ? 1.0 : 0.0;
      g.features(i, f) = mean + 0.5 * noise(rng);
    }

  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// edge splitting

EdgeSplit split_edges(const Graph& g, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw ValidationError("split: train fraction must lie strictly in (0,1)");
  const std::size_t m = g.edges.size();
  if (m < 5) throw SizingError("split: graph needs at least 5 edges");

  std::mt19937_64 rng(seed);
  std::vector<Edge> shuffled = g.edges;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  const std::size_t n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(m)));
  const std::size_t rem = m - n_train;
  const std::size_t n_val = (rem + 1) / 2;
  const std::size_t n_test = rem / 2;
  if (n_train == 0 || n_val == 0 || n_test == 0)
    throw SizingError("split: a partition would be empty (|E|=" + std::to_string(m) +
                      ", train_frac=" + std::to_string(train_frac) + ")");

  EdgeSplit s;
  s.seed = seed;
  s.train_pos.assign(shuffled.begin(), shuffled.begin() + n_train);
  s.val_pos.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
  s.test_pos.assign(shuffled.begin() + n_train + n_val, shuffled.end());

  // negatives: uniform over non-edges, without replacement across val and test
  std::vector<Edge> non_edges;
  non_edges.reserve(static_cast<std::size_t>(g.n_nodes) * (g.n_nodes - 1) / 2 - m);
  for (int i = 0; i < g.n_nodes; ++i)
    for (int j = i + 1; j < g.n_nodes; ++j)
      if (!g.has_edge(i, j)) non_edges.push_back(Edge{i, j});
  if (non_edges.size() < n_val + n_test)
    throw SizingError("split: not enough non-edges to sample negatives");
  std::shuffle(non_edges.begin(), non_edges.end(), rng);
  s.val_neg.assign(non_edges.begin(), non_edges.begin() + n_val);
  s.test_neg.assign(non_edges.begin() + n_val, non_edges.begin() + n_val + n_test);
  return s;
}

// ---------------------------------------------------------------------------
// group edge mass

GroupEdgeMass group_edge_mass(const EdgeProbMatrix& prob, const SensitivePartition& partition) {
  const std::size_t n = prob.n();
  if (partition.n_nodes != static_cast<int>(n))
    throw ValidationError("group_edge_mass: partition size != matrix size");
  GroupEdgeMass mass;
  mass.intra.assign(partition.n_groups, 0.0);
  mass.inter.assign(partition.n_groups, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int si = partition.labels[i];
    const double* row = prob.p.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = row[j];
      mass.total += v;
      if (partition.labels[j] == si)
        mass.intra[si] += v;
      else
        mass.inter[si] += v;
    }
  }
  return mass;
}

// ---------------------------------------------------------------------------
// serialization

std::string graph_to_string(const Graph& g) {
  std::ostringstream out;
  out << "graphfair-graph v1\n";
  out << "nodes " << g.n_nodes << "\n";
  out << "features " << g.features.cols() << "\n";
  out << "groups " << g.n_groups << "\n";
  out << "sensitive-kind " << (g.synthetic_sensitive ? "synthetic" : "real") << "\n";
  out << "edges " << g.edges.size() << "\n";
  for (const Edge& e : g.edges) out << e.u << " " << e.v << "\n";
  out << "feature-rows\n";
  for (int i = 0; i < g.n_nodes; ++i) {
    for (std::size_t j = 0; j < g.features.cols(); ++j) {
      if (j) out << " ";
      out << io::fmt_double(g.features(i, j));
    }
    out << "\n";
  }
  out << "sensitive-labels\n";
  for (int s : g.sensitive) out << s << "\n";
  out << "end\n";
  return out.str();
}

void save_graph(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  out << graph_to_string(g);
}

namespace {

std::string next_content_line(std::ifstream& in, const std::string& path, std::size_t& lineno) {
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = io::trim(line);
    if (!t.empty()) return std::string(t);
  }
  throw ParseError(path + ": unexpected end of file");
}

long expect_kv(const std::string& line, const std::string& key, const std::string& path,
               std::size_t lineno) {
  auto tok = io::split_ws(line);
  if (tok.size() != 2 || tok[0] != key)
    throw ParseError(path + ":" + std::to_string(lineno) + ": expected '" + key + " <value>'");
  return io::parse_long(tok[1], path + ":" + std::to_string(lineno));
}

}  // namespace

Graph load_graph_container(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::size_t lineno = 0;
  if (next_content_line(in, path, lineno) != "graphfair-graph v1")
    throw ParseError(path + ": not a graphfair graph file");
  Graph g;
  g.n_nodes = static_cast<int>(expect_kv(next_content_line(in, path, lineno), "nodes", path, lineno));
  const long f = expect_kv(next_content_line(in, path, lineno), "features", path, lineno);
  g.n_groups = static_cast<int>(expect_kv(next_content_line(in, path, lineno), "groups", path, lineno));
  {
    auto tok = io::split_ws(next_content_line(in, path, lineno));
    if (tok.size() != 2 || tok[0] != "sensitive-kind" || (tok[1] != "real" && tok[1] != "synthetic"))
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected sensitive-kind");
    g.synthetic_sensitive = tok[1] == "synthetic";
  }
  const long m = expect_kv(next_content_line(in, path, lineno), "edges", path, lineno);
  g.edges.reserve(m);
  for (long i = 0; i < m; ++i) {
    auto tok = io::split_ws(next_content_line(in, path, lineno));
    if (tok.size() != 2)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected edge 'u v'");
    g.edges.push_back(Edge{static_cast<int>(io::parse_long(tok[0], path)),
                           static_cast<int>(io::parse_long(tok[1], path))});
  }
  if (next_content_line(in, path, lineno) != "feature-rows")
    throw ParseError(path + ": expected feature-rows section");
  g.features = Matrix(g.n_nodes, f);
  for (int i = 0; i < g.n_nodes; ++i) {
    auto tok = io::split_ws(next_content_line(in, path, lineno));
    if (static_cast<long>(tok.size()) != f)
      throw ParseError(path + ":" + std::to_string(lineno) + ": wrong feature column count");
    for (long j = 0; j < f; ++j)
      g.features(i, j) = io::parse_double(tok[j], path + ":" + std::to_string(lineno));
  }
  if (next_content_line(in, path, lineno) != "sensitive-labels")
    throw ParseError(path + ": expected sensitive-labels section");
  g.sensitive.resize(g.n_nodes);
  for (int i = 0; i < g.n_nodes; ++i)
    g.sensitive[i] = static_cast<int>(
        io::parse_long(next_content_line(in, path, lineno), path + ":" + std::to_string(lineno)));
  if (next_content_line(in, path, lineno) != "end")
    throw ParseError(path + ": missing end marker");
  g.validate();
  return g;
}

namespace {

void write_edge_section(std::ostream& out, const std::string& name, const std::vector<Edge>& es) {
  out << name << " " << es.size() << "\n";
  for (const Edge& e : es) out << e.u << " " << e.v << "\n";
}

std::vector<Edge> read_edge_section(std::ifstream& in, const std::string& name,
                                    const std::string& path, std::size_t& lineno) {
  const long m = expect_kv(next_content_line(in, path, lineno), name, path, lineno);
  std::vector<Edge> es;
  es.reserve(m);
  for (long i = 0; i < m; ++i) {
    auto tok = io::split_ws(next_content_line(in, path, lineno));
    if (tok.size() != 2)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected edge 'u v'");
    es.push_back(Edge{static_cast<int>(io::parse_long(tok[0], path)),
                      static_cast<int>(io::parse_long(tok[1], path))});
  }
  return es;
}

}  // namespace

void save_split(const EdgeSplit& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  out << "graphfair-split v1\n";
  out << "seed " << s.seed << "\n";
  write_edge_section(out, "train-pos", s.train_pos);
  write_edge_section(out, "val-pos", s.val_pos);
  write_edge_section(out, "test-pos", s.test_pos);
  write_edge_section(out, "val-neg", s.val_neg);
  write_edge_section(out, "test-neg", s.test_neg);
  out << "end\n";
}

EdgeSplit load_split(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::size_t lineno = 0;
  if (next_content_line(in, path, lineno) != "graphfair-split v1")
    throw ParseError(path + ": not a graphfair split file");
  EdgeSplit s;
  s.seed = static_cast<std::uint64_t>(
      expect_kv(next_content_line(in, path, lineno), "seed", path, lineno));
  s.train_pos = read_edge_section(in, "train-pos", path, lineno);
  s.val_pos = read_edge_section(in, "val-pos", path, lineno);
  s.test_pos = read_edge_section(in, "test-pos", path, lineno);
  s.val_neg = read_edge_section(in, "val-neg", path, lineno);
  s.test_neg = read_edge_section(in, "test-neg", path, lineno);
  if (next_content_line(in, path, lineno) != "end")
    throw ParseError(path + ": missing end marker");
  return s;
}

}  // namespace graphfair
