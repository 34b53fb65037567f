#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "graphfair/graph.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("GRAPHFAIR_CLI");
  REQUIRE_MESSAGE(p != nullptr, "GRAPHFAIR_CLI must point at the CLI binary");
  return p;
}

int run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("gf_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("gen-sbm writes a loadable graph and a resolved config snapshot") {
  TempDir tmp;
  CHECK(run("gen-sbm --sizes 10,10 --intra 0.5 --inter 0.1 --feature-dim 3 --seed 4 -o " +
            (tmp / "g")) == 0);
  const graphfair::Graph g = graphfair::load_graph_container(tmp / "g/graph.txt");
  CHECK(g.n_nodes == 20);
  const std::string cfg = slurp(fs::path(tmp / "g/resolved_config.txt"));
  CHECK(cfg.find("seed=4") != std::string::npos);
  CHECK(cfg.find("intra=0.5") != std::string::npos);
}

TEST_CASE("unknown subcommand and unknown config keys are rejected") {
  TempDir tmp;
  CHECK(run("frobnicate") != 0);
  std::ofstream cfg(tmp / "bad.ini");
  cfg << "[gen-sbm]\nseed=3\nnot_a_key=1\n";
  cfg.close();
  CHECK(run("gen-sbm --config " + (tmp / "bad.ini") + " -o " + (tmp / "g")) != 0);
}

TEST_CASE("config values apply and flags take precedence") {
  TempDir tmp;
  {
    std::ofstream cfg(tmp / "c.ini");
    cfg << "[gen-sbm]\nsizes=6,6\nintra=0.9\ninter=0.2\nfeature-dim=2\nseed=9\n";
  }
  CHECK(run("gen-sbm --config " + (tmp / "c.ini") + " -o " + (tmp / "a")) == 0);
  const graphfair::Graph a = graphfair::load_graph_container(tmp / "a/graph.txt");
  CHECK(a.n_nodes == 12);
  // flag overrides the config file's sizes
  CHECK(run("gen-sbm --config " + (tmp / "c.ini") + " --sizes 4,4 -o " + (tmp / "b")) == 0);
  const graphfair::Graph b = graphfair::load_graph_container(tmp / "b/graph.txt");
  CHECK(b.n_nodes == 8);
  const std::string resolved = slurp(fs::path(tmp / "b/resolved_config.txt"));
  CHECK(resolved.find("sizes=\"4,4\"") != std::string::npos);
}

TEST_CASE("missing input files exit with the parse-error code") {
  TempDir tmp;
  CHECK(run("split --graph " + (tmp / "nope.txt") + " -o " + (tmp / "s")) == 3);
}

TEST_CASE("the full pipeline runs and no subcommand mutates its inputs") {
  TempDir tmp;
  REQUIRE(run("gen-sbm --sizes 12,12 --intra 0.5 --inter 0.1 --feature-dim 3 --seed 2 -o " +
              (tmp / "g")) == 0);
  const std::string graph_before = slurp(fs::path(tmp / "g/graph.txt"));
  REQUIRE(run("split --graph " + (tmp / "g/graph.txt") + " --train-frac 0.8 --seed 5 -o " +
              (tmp / "s")) == 0);
  const std::string split_before = slurp(fs::path(tmp / "s/split.txt"));
  REQUIRE(run("train-lp --graph " + (tmp / "g/graph.txt") + " --split " + (tmp / "s/split.txt") +
              " --epochs 12 --batch-size 24 --hidden-dim 4 --seed 3 -o " + (tmp / "t")) == 0);
  REQUIRE(run("eval-lp --graph " + (tmp / "g/graph.txt") + " --split " + (tmp / "s/split.txt") +
              " --weights " + (tmp / "t/weights.txt") + " -o " + (tmp / "e")) == 0);
  REQUIRE(run("bound --graph " + (tmp / "g/graph.txt") + " --weights " + (tmp / "t/weights.txt") +
              " -o " + (tmp / "b")) == 0);
  const std::string report = slurp(fs::path(tmp / "b/bound_report.txt"));
  CHECK(report.find("alpha1_0") != std::string::npos);
  CHECK(report.find("theorem1_bound_0") != std::string::npos);
  CHECK(report.find("prop1_bound") != std::string::npos);
  CHECK(slurp(fs::path(tmp / "g/graph.txt")) == graph_before);
  CHECK(slurp(fs::path(tmp / "s/split.txt")) == split_before);
}

TEST_CASE("three-file inputs are accepted everywhere a graph is") {
  TempDir tmp;
  {
    std::ofstream e(tmp / "e.txt");
    e << "0 1\n1 2\n2 3\n3 4\n0 2\n1 3\n";
    std::ofstream x(tmp / "x.csv");
    for (int i = 0; i < 5; ++i) x << i << "," << 2 * i << "\n";
    std::ofstream s(tmp / "s.txt");
    s << "0\n0\n0\n1\n1\n";
  }
  CHECK(run("split --edges " + (tmp / "e.txt") + " --features " + (tmp / "x.csv") +
            " --sensitive " + (tmp / "s.txt") + " --train-frac 0.7 --seed 2 -o " +
            (tmp / "s1")) == 0);
  // both inputs at once is a config error
  CHECK(run("split --graph " + (tmp / "e.txt") + " --edges " + (tmp / "e.txt") + " --features " +
            (tmp / "x.csv") + " --sensitive " + (tmp / "s.txt") + " -o " + (tmp / "s2")) == 2);
}

TEST_CASE("stats emits the listing and distances against a reference") {
  TempDir tmp;
  REQUIRE(run("gen-sbm --sizes 8,8 --intra 0.6 --inter 0.1 --feature-dim 2 --seed 6 -o " +
              (tmp / "g")) == 0);
  REQUIRE(run("stats --graph " + (tmp / "g/graph.txt") + " --ref " + (tmp / "g/graph.txt") +
              " -o " + (tmp / "st")) == 0);
  const std::string summary = slurp(fs::path(tmp / "st/stats_summary.txt"));
  CHECK(summary.find("degree_w1 0") != std::string::npos);
  CHECK(summary.find("intra_edges") != std::string::npos);
  const std::string csv = slurp(fs::path(tmp / "st/intra_inter.csv"));
  CHECK(csv.find("u,v,tag") != std::string::npos);
}

TEST_SUITE_END();
