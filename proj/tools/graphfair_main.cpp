// graphfair command-line front end: synthetic data, splits, link-prediction
// training, bound reports, diffusion training, sampling and the generation
// study, all with reproducible seeded configs.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "graphfair/eval.hpp"
#include "graphfair/text_io.hpp"
#include "graphfair/weights_io.hpp"

namespace fs = std::filesystem;
using namespace graphfair;

namespace {

struct OutputDir {
  fs::path dir;
  std::ofstream log;

  explicit OutputDir(const std::string& path) : dir(path) {
    fs::create_directories(dir);
    log.open(dir / "run.log", std::ios::app);
  }

  // Timestamps are confined to the log file; every other output must be
  // byte-reproducible under a fixed seed.
  void log_line(const std::string& msg) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%F %T", std::localtime(&tt));
    log << "[" << buf << "] " << msg << "\n";
  }

  void write_file(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name);
    if (!out) throw ParseError("cannot write " + (dir / name).string());
    out << content;
    log_line("wrote " + name);
  }
};

void write_resolved_config(CLI::App* sub, OutputDir& out) {
  out.write_file("resolved_config.txt", sub->config_to_str(true, false));
}

Graph load_graph_input(const std::string& container, const std::string& edge_file,
                       const std::string& feature_file, const std::string& sensitive_file) {
  if (!container.empty()) {
    if (!edge_file.empty() || !feature_file.empty() || !sensitive_file.empty())
      throw ConfigError("give either --graph or the three-file inputs, not both");
    return load_graph_container(container);
  }
  if (edge_file.empty() || feature_file.empty() || sensitive_file.empty())
    throw ConfigError("graph input missing: --graph or --edges/--features/--sensitive");
  LoadStats stats;
  Graph g = load_graph(edge_file, feature_file, sensitive_file, &stats);
  if (stats.self_loops_dropped > 0)
    std::cerr << "warning: dropped " << stats.self_loops_dropped << " self loop(s)\n";
  return g;
}

// Adds the trio of raw-file inputs next to the container option.
struct GraphInput {
  std::string container, edges, features, sensitive;

  void attach(CLI::App* sub) {
    sub->add_option("--graph", container, "graph container file");
    sub->add_option("--edges", edges, "edge list file (u v per line)");
    sub->add_option("--features", features, "dense CSV feature file");
    sub->add_option("--sensitive", sensitive, "sensitive label file (one id per line)");
  }

  Graph load() const { return load_graph_input(container, edges, features, sensitive); }
};

std::vector<int> parse_int_list(const std::string& csv, const std::string& what) {
  std::vector<int> out;
  for (auto cell : io::split_char(csv, ','))
    out.push_back(static_cast<int>(io::parse_long(io::trim(cell), what)));
  return out;
}

std::vector<double> parse_double_list(const std::string& csv, const std::string& what) {
  std::vector<double> out;
  for (auto cell : io::split_char(csv, ','))
    out.push_back(io::parse_double(io::trim(cell), what));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph fairness toolkit: bias bounds, fair link prediction and fair graph generation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key-value config file with one [section] per subcommand");
  app.allow_config_extras(CLI::config_extras_mode::error);

  // ---- gen-sbm ----
  auto* gen = app.add_subcommand("gen-sbm", "generate a stochastic block model graph");
  std::string gen_sizes = "100,100,100";
  double gen_intra = 0.3, gen_inter = 0.05;
  int gen_fdim = 8;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "out";
  gen->add_option("--sizes", gen_sizes, "comma-separated group sizes");
  gen->add_option("--intra", gen_intra, "intra-group edge probability");
  gen->add_option("--inter", gen_inter, "inter-group edge probability");
  gen->add_option("--feature-dim", gen_fdim, "feature dimension");
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("-o,--out", gen_out, "output directory");

  // ---- split ----
  auto* spl = app.add_subcommand("split", "split edges into train/val/test with negatives");
  GraphInput spl_graph;
  spl_graph.attach(spl);
  double spl_frac = 0.8;
  std::uint64_t spl_seed = 1;
  std::string spl_out = "out";
  spl->add_option("--train-frac", spl_frac, "fraction of edges used for training");
  spl->add_option("--seed", spl_seed, "rng seed");
  spl->add_option("-o,--out", spl_out, "output directory");

  // ---- train-lp ----
  auto* tlp = app.add_subcommand("train-lp", "train the GCN link predictor");
  GraphInput tlp_graph;
  tlp_graph.attach(tlp);
  std::string tlp_split, tlp_out = "out";
  TrainConfig tlp_cfg;
  tlp->add_option("--split", tlp_split, "edge split file")->required();
  tlp->add_option("--lambda", tlp_cfg.lambda, "fairness regularizer weight");
  tlp->add_option("--lr", tlp_cfg.learning_rate, "learning rate");
  tlp->add_option("--epochs", tlp_cfg.epochs, "training epochs");
  tlp->add_option("--batch-size", tlp_cfg.batch_size, "node batch size");
  tlp->add_option("--hidden-dim", tlp_cfg.hidden_dim, "embedding dimension");
  tlp->add_option("--negative-ratio", tlp_cfg.negative_ratio, "negatives per positive");
  tlp->add_option("--seed", tlp_cfg.seed, "rng seed");
  tlp->add_option("-o,--out", tlp_out, "output directory");

  // ---- eval-lp ----
  auto* elp = app.add_subcommand("eval-lp", "evaluate a trained link predictor");
  GraphInput elp_graph;
  elp_graph.attach(elp);
  std::string elp_split, elp_weights, elp_out = "out";
  elp->add_option("--split", elp_split, "edge split file")->required();
  elp->add_option("--weights", elp_weights, "gcn weights file")->required();
  elp->add_option("-o,--out", elp_out, "output directory");

  // ---- bound ----
  auto* bnd = app.add_subcommand("bound", "fairness report with disparity bounds for a model");
  GraphInput bnd_graph;
  bnd_graph.attach(bnd);
  std::string bnd_split, bnd_weights, bnd_out = "out";
  bnd->add_option("--split", bnd_split, "optional split; message passing then uses train edges");
  bnd->add_option("--weights", bnd_weights, "gcn weights file")->required();
  bnd->add_option("-o,--out", bnd_out, "output directory");

  // ---- train-diff ----
  auto* tdf = app.add_subcommand("train-diff", "train the diffusion graph generator");
  GraphInput tdf_graph;
  tdf_graph.attach(tdf);
  std::string tdf_out = "out";
  diffusion::DiffusionTrainConfig tdf_cfg;
  tdf->add_option("--lambda", tdf_cfg.lambda, "fairness regularizer weight");
  tdf->add_option("--epochs", tdf_cfg.epochs, "optimizer steps");
  tdf->add_option("--lr", tdf_cfg.learning_rate, "learning rate");
  tdf->add_option("--batch-size", tdf_cfg.batch_size, "node batch size");
  tdf->add_option("--steps", tdf_cfg.steps, "diffusion steps T");
  tdf->add_option("--offset", tdf_cfg.schedule_offset, "cosine schedule offset s");
  tdf->add_option("--layers", tdf_cfg.sizes.layers, "message passing layers");
  tdf->add_option("--hidden", tdf_cfg.sizes.hidden, "node channel width");
  tdf->add_option("--s-hidden", tdf_cfg.sizes.s_hidden, "sensitive channel width");
  tdf->add_option("--time-hidden", tdf_cfg.sizes.time_hidden, "timestep embedding width");
  tdf->add_option("--edge-hidden", tdf_cfg.sizes.edge_hidden, "edge head width");
  tdf->add_option("--seed", tdf_cfg.seed, "rng seed");
  tdf->add_option("-o,--out", tdf_out, "output directory");

  // ---- sample ----
  auto* smp = app.add_subcommand("sample", "sample synthetic graphs from a trained generator");
  std::string smp_weights, smp_out = "out", smp_groupdist, smp_sensitive_from;
  int smp_nodes = 0, smp_count = 1;
  std::uint64_t smp_seed = 1;
  smp->add_option("--weights", smp_weights, "denoiser weights file")->required();
  smp->add_option("--n-nodes", smp_nodes, "nodes per sample (default: training distribution size)");
  smp->add_option("--samples", smp_count, "number of graphs to sample");
  smp->add_option("--group-distribution", smp_groupdist,
                  "comma-separated group probabilities (default: from the weights file)");
  smp->add_option("--sensitive-from", smp_sensitive_from,
                  "graph container whose sensitive labels are reused (index-aligned sampling)");
  smp->add_option("--seed", smp_seed, "rng seed");
  smp->add_option("-o,--out", smp_out, "output directory");

  // ---- study ----
  auto* std_cmd = app.add_subcommand("study", "bias amplification study over sampled graphs");
  GraphInput study_graph;
  study_graph.attach(std_cmd);
  std::string study_split, study_weights, study_out = "out";
  eval::StudyConfig study_cfg;
  std_cmd->add_option("--split", study_split, "edge split file of the real graph")->required();
  std_cmd->add_option("--diff-weights", study_weights, "denoiser weights file")->required();
  std_cmd->add_option("--samples", study_cfg.n_samples, "number of synthetic graphs");
  std_cmd->add_option("--sample-seed", study_cfg.sample_seed, "generator rng seed");
  std_cmd->add_option("--train-frac", study_cfg.train_frac, "split fraction on synthetic graphs");
  std_cmd->add_option("--jobs", study_cfg.jobs, "parallel per-sample pipelines");
  std_cmd->add_option("--lp-lambda", study_cfg.lp.lambda, "LP fairness weight");
  std_cmd->add_option("--lp-lr", study_cfg.lp.learning_rate, "LP learning rate");
  std_cmd->add_option("--lp-epochs", study_cfg.lp.epochs, "LP epochs");
  std_cmd->add_option("--lp-batch-size", study_cfg.lp.batch_size, "LP batch size");
  std_cmd->add_option("--lp-hidden-dim", study_cfg.lp.hidden_dim, "LP embedding dimension");
  std_cmd->add_option("--lp-seed", study_cfg.lp.seed, "LP rng seed");
  std_cmd->add_option("-o,--out", study_out, "output directory");

  // ---- stats ----
  auto* sts = app.add_subcommand("stats", "intra/inter edge listing and distribution distances");
  GraphInput sts_graph;
  sts_graph.attach(sts);
  std::string sts_ref, sts_out = "out";
  sts->add_option("--ref", sts_ref, "reference graph container for W1 distances");
  sts->add_option("-o,--out", sts_out, "output directory");

  // --config may be written anywhere on the line; it belongs to the top
  // level, so hoist it in front of the subcommand.
  std::vector<std::string> args;
  std::vector<std::string> config_args;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) {
      config_args.push_back(a);
      config_args.push_back(argv[++i]);
    } else if (a.rfind("--config=", 0) == 0) {
      config_args.push_back(a);
    } else {
      args.push_back(a);
    }
  }
  args.insert(args.begin(), config_args.begin(), config_args.end());
  std::reverse(args.begin(), args.end());  // CLI11's vector overload wants a stack
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      OutputDir out(gen_out);
      out.log_line("gen-sbm start");
      const Graph g = sbm_generate(parse_int_list(gen_sizes, "--sizes"), gen_intra, gen_inter,
                                   gen_fdim, gen_seed);
      out.write_file("graph.txt", graph_to_string(g));
      write_resolved_config(gen, out);
      out.log_line("gen-sbm done");
    } else if (*spl) {
      OutputDir out(spl_out);
      out.log_line("split start");
      const Graph g = spl_graph.load();
      const EdgeSplit s = split_edges(g, spl_frac, spl_seed);
      save_split(s, (out.dir / "split.txt").string());
      out.log_line("wrote split.txt");
      write_resolved_config(spl, out);
    } else if (*tlp) {
      OutputDir out(tlp_out);
      out.log_line("train-lp start");
      const Graph g = tlp_graph.load();
      const EdgeSplit s = load_split(tlp_split);
      const TrainResult r = train_lp(g, s, tlp_cfg);
      save_gcn(r.params, (out.dir / "weights.txt").string());
      out.log_line("wrote weights.txt");
      out.write_file("history.csv", history_to_csv(r.history));
      std::ostringstream sel;
      sel << "best_epoch " << r.best_epoch << "\n";
      out.write_file("selection.txt", sel.str());
      write_resolved_config(tlp, out);
    } else if (*elp) {
      OutputDir out(elp_out);
      out.log_line("eval-lp start");
      const Graph g = elp_graph.load();
      const EdgeSplit s = load_split(elp_split);
      const GcnParams params = load_gcn(elp_weights);
      const FairnessReport r = evaluate_lp(params, g, s);
      out.write_file("report.txt", report_to_kv(r));
      out.write_file("report.csv", report_csv_header(g.n_groups) + "\n" + report_to_csv_row(r) + "\n");
      write_resolved_config(elp, out);
    } else if (*bnd) {
      OutputDir out(bnd_out);
      out.log_line("bound start");
      const Graph g = bnd_graph.load();
      const GcnParams params = load_gcn(bnd_weights);
      FairnessReport r;
      if (!bnd_split.empty()) {
        const EdgeSplit s = load_split(bnd_split);
        const Matrix h = encode(g, s.train_pos, params);
        r = model_report(params, g, h, &s);
      } else {
        const Matrix h = encode(g, g.edges, params);
        r = model_report(params, g, h, nullptr);
      }
      out.write_file("bound_report.txt", report_to_kv(r));
      out.write_file("bound_report.csv",
                     report_csv_header(g.n_groups) + "\n" + report_to_csv_row(r) + "\n");
      write_resolved_config(bnd, out);
    } else if (*tdf) {
      OutputDir out(tdf_out);
      out.log_line("train-diff start");
      const Graph g = tdf_graph.load();
      const diffusion::DiffusionTrainResult r = train_diffusion(g, tdf_cfg);
      save_denoiser(r.params, (out.dir / "denoiser.txt").string());
      out.log_line("wrote denoiser.txt");
      std::ostringstream hist;
      hist << "step,t,loss,feature_ce,edge_ce,reg\n";
      for (const auto& h : r.history)
        hist << h.step << "," << h.t << "," << io::fmt_double(h.loss) << ","
             << io::fmt_double(h.feature_ce) << "," << io::fmt_double(h.edge_ce) << ","
             << io::fmt_double(h.regularizer) << "\n";
      out.write_file("history.csv", hist.str());
      write_resolved_config(tdf, out);
    } else if (*smp) {
      OutputDir out(smp_out);
      out.log_line("sample start");
      const diffusion::DenoiserParams params = load_denoiser(smp_weights);
      std::vector<int> fixed_sensitive;
      int n_groups = static_cast<int>(params.group_distribution.size());
      std::vector<double> dist = params.group_distribution;
      if (!smp_sensitive_from.empty()) {
        const Graph ref = load_graph_container(smp_sensitive_from);
        fixed_sensitive = ref.sensitive;
        n_groups = ref.n_groups;
      } else if (!smp_groupdist.empty()) {
        dist = parse_double_list(smp_groupdist, "--group-distribution");
        n_groups = static_cast<int>(dist.size());
      }
      std::mt19937_64 rng(smp_seed);
      for (int i = 0; i < smp_count; ++i) {
        Graph g = fixed_sensitive.empty()
                      ? diffusion::sample_graph(params, smp_nodes, dist, rng)
                      : diffusion::sample_graph_with_sensitive(params, fixed_sensitive, n_groups, rng);
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%03d.txt", i);
        out.write_file(name, graph_to_string(g));
      }
      write_resolved_config(smp, out);
    } else if (*std_cmd) {
      OutputDir out(study_out);
      out.log_line("study start");
      const Graph g = study_graph.load();
      const EdgeSplit s = load_split(study_split);
      const diffusion::DenoiserParams params = load_denoiser(study_weights);
      const eval::GenerationReport r = eval::bias_amplification_study(g, s, params, study_cfg);
      out.write_file("generation_report.csv", eval::generation_report_to_csv(r));
      out.write_file("summary.txt", eval::generation_report_summary(r));
      write_resolved_config(std_cmd, out);
    } else if (*sts) {
      OutputDir out(sts_out);
      out.log_line("stats start");
      const Graph g = sts_graph.load();
      const SensitivePartition partition = SensitivePartition::from_graph(g);
      const eval::IntraInterListing l = eval::intra_inter_listing(g, partition);
      out.write_file("intra_inter.csv", eval::listing_to_csv(l));
      std::string summary = eval::listing_summary(l);
      if (!sts_ref.empty()) {
        const Graph ref = load_graph_container(sts_ref);
        summary += "degree_w1 " + io::fmt_double(eval::degree_wasserstein(g, ref)) + "\n";
        summary += "clustering_w1 " + io::fmt_double(eval::clustering_wasserstein(g, ref)) + "\n";
      }
      out.write_file("stats_summary.txt", summary);
      write_resolved_config(sts, out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
