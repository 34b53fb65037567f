#include "graphfair/weights_io.hpp"

#include <fstream>
#include <sstream>

#include "graphfair/text_io.hpp"

namespace graphfair {

namespace {

constexpr const char* kHeader = "graphfair-weights v1";

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "tensor " << name << " " << m.rows() << " " << m.cols() << "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << " ";
      out << io::fmt_double(m(i, j));
    }
    out << "\n";
  }
}

struct LineReader {
  std::ifstream in;
  std::string path;
  std::size_t lineno = 0;

  explicit LineReader(const std::string& p) : in(p), path(p) {
    if (!in) throw ParseError("cannot open file: " + p);
  }

  std::string next() {
    std::string line;
    while (std::getline(in, line)) {
      ++lineno;
      auto t = io::trim(line);
      if (!t.empty()) return std::string(t);
    }
    throw ParseError(path + ": unexpected end of file");
  }

  std::string context() const { return path + ":" + std::to_string(lineno); }
};

Matrix read_tensor(LineReader& r, const std::string& expected_name) {
  auto tok = io::split_ws(r.next());
  if (tok.size() != 4 || tok[0] != "tensor" || tok[1] != expected_name)
    throw ParseError(r.context() + ": expected tensor " + expected_name);
  const long rows = io::parse_long(tok[2], r.context());
  const long cols = io::parse_long(tok[3], r.context());
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    auto cells = io::split_ws(r.next());
    if (static_cast<long>(cells.size()) != cols)
      throw ParseError(r.context() + ": wrong value count in tensor row");
    for (long j = 0; j < cols; ++j) m(i, j) = io::parse_double(cells[j], r.context());
  }
  return m;
}

long kv_long(LineReader& r, const std::string& key) {
  auto tok = io::split_ws(r.next());
  if (tok.size() != 2 || tok[0] != key)
    throw ParseError(r.context() + ": expected '" + key + " <value>'");
  return io::parse_long(tok[1], r.context());
}

double kv_double(LineReader& r, const std::string& key) {
  auto tok = io::split_ws(r.next());
  if (tok.size() != 2 || tok[0] != key)
    throw ParseError(r.context() + ": expected '" + key + " <value>'");
  return io::parse_double(tok[1], r.context());
}

}  // namespace

// ---------------------------------------------------------------------------
// GCN weights

void save_gcn(const GcnParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  out << kHeader << "\n";
  out << "kind gcn\n";
  out << "seed " << params.seed << "\n";
  out << "init " << params.init_scheme << "\n";
  write_tensor(out, "weight", params.weight);
  out << "end\n";
}

GcnParams load_gcn(const std::string& path) {
  LineReader r(path);
  if (r.next() != kHeader) throw ParseError(path + ": not a graphfair weights file");
  auto kind = io::split_ws(r.next());
  if (kind.size() != 2 || kind[0] != "kind" || kind[1] != "gcn")
    throw ParseError(path + ": not a gcn weights file");
  GcnParams p;
  p.seed = static_cast<std::uint64_t>(kv_long(r, "seed"));
  auto init = io::split_ws(r.next());
  if (init.size() != 2 || init[0] != "init") throw ParseError(r.context() + ": expected init");
  p.init_scheme = std::string(init[1]);
  p.weight = read_tensor(r, "weight");
  if (r.next() != "end") throw ParseError(path + ": missing end marker");
  return p;
}

// ---------------------------------------------------------------------------
// denoiser weights

void save_denoiser(const diffusion::DenoiserParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  out << kHeader << "\n";
  out << "kind denoiser\n";
  const auto& s = params.sizes;
  out << "layers " << s.layers << "\n";
  out << "hidden " << s.hidden << "\n";
  out << "s-hidden " << s.s_hidden << "\n";
  out << "time-hidden " << s.time_hidden << "\n";
  out << "edge-hidden " << s.edge_hidden << "\n";
  out << "feature-dim " << s.feature_dim << "\n";
  out << "groups " << s.n_groups << "\n";
  out << "schedule-steps " << params.schedule.steps << "\n";
  out << "schedule-offset " << io::fmt_double(params.schedule.offset) << "\n";
  out << "edge-marginal " << io::fmt_double(params.channel_marginals.edge[0]) << " "
      << io::fmt_double(params.channel_marginals.edge[1]) << "\n";
  for (const auto& fm : params.channel_marginals.feature)
    out << "feature-marginal " << io::fmt_double(fm[0]) << " " << io::fmt_double(fm[1]) << "\n";
  out << "group-distribution";
  for (double p : params.group_distribution) out << " " << io::fmt_double(p);
  out << "\n";
  for (const auto& [name, m] : params.named_parameters()) write_tensor(out, name, *m);
  out << "end\n";
}

diffusion::DenoiserParams load_denoiser(const std::string& path) {
  LineReader r(path);
  if (r.next() != kHeader) throw ParseError(path + ": not a graphfair weights file");
  auto kind = io::split_ws(r.next());
  if (kind.size() != 2 || kind[0] != "kind" || kind[1] != "denoiser")
    throw ParseError(path + ": not a denoiser weights file");

  diffusion::DenoiserSizes sizes;
  sizes.layers = static_cast<int>(kv_long(r, "layers"));
  sizes.hidden = static_cast<int>(kv_long(r, "hidden"));
  sizes.s_hidden = static_cast<int>(kv_long(r, "s-hidden"));
  sizes.time_hidden = static_cast<int>(kv_long(r, "time-hidden"));
  sizes.edge_hidden = static_cast<int>(kv_long(r, "edge-hidden"));
  sizes.feature_dim = static_cast<int>(kv_long(r, "feature-dim"));
  sizes.n_groups = static_cast<int>(kv_long(r, "groups"));

  const int steps = static_cast<int>(kv_long(r, "schedule-steps"));
  const double offset = kv_double(r, "schedule-offset");

  // Reconstructing the schedule from (T, s) is exact: it is a pure function.
  diffusion::DenoiserParams p = diffusion::DenoiserParams::init(sizes, 0);
  p.schedule = diffusion::build_schedule(steps, offset);

  auto em = io::split_ws(r.next());
  if (em.size() != 3 || em[0] != "edge-marginal")
    throw ParseError(r.context() + ": expected edge-marginal");
  p.channel_marginals.edge = {io::parse_double(em[1], r.context()),
                              io::parse_double(em[2], r.context())};
  p.channel_marginals.feature.clear();
  for (int f = 0; f < sizes.feature_dim; ++f) {
    auto fm = io::split_ws(r.next());
    if (fm.size() != 3 || fm[0] != "feature-marginal")
      throw ParseError(r.context() + ": expected feature-marginal");
    p.channel_marginals.feature.push_back(
        {io::parse_double(fm[1], r.context()), io::parse_double(fm[2], r.context())});
  }
  auto gd = io::split_ws(r.next());
  if (gd.empty() || gd[0] != "group-distribution")
    throw ParseError(r.context() + ": expected group-distribution");
  p.group_distribution.clear();
  for (std::size_t i = 1; i < gd.size(); ++i)
    p.group_distribution.push_back(io::parse_double(gd[i], r.context()));

  for (auto& [name, m] : p.named_parameters()) *m = read_tensor(r, name);
  if (r.next() != "end") throw ParseError(path + ": missing end marker");
  p.validate();
  return p;
}

std::string weights_kind(const std::string& path) {
  LineReader r(path);
  if (r.next() != kHeader) throw ParseError(path + ": not a graphfair weights file");
  auto kind = io::split_ws(r.next());
  if (kind.size() != 2 || kind[0] != "kind")
    throw ParseError(path + ": missing kind tag");
  return std::string(kind[1]);
}

}  // namespace graphfair
