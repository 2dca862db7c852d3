// Command-line front end: simulate, fit, select, evaluate, bench.

#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "dagcd/runner.hpp"

namespace {

using dagcd::RunConfig;

struct Flags {
  std::string family = "scalefree";
  std::vector<std::string> families;
  std::size_t match_edges = 0;
  std::string config_file;
  std::string interventions;
};

void add_model_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--grid-size", cfg.path.grid_size, "number of lambda values (J)");
  cmd->add_option("--grid-ratio", cfg.path.ratio, "lambda_J / lambda_1");
  cmd->add_option("--gamma", cfg.path.gamma, "adaptive-weight exponent");
  cmd->add_option("--alpha-select", cfg.path.alpha_select, "difference-ratio threshold");
  cmd->add_option("--inner-tol", cfg.solver.inner_tol, "max-norm change ending the inner loop");
  cmd->add_option("--max-inner", cfg.solver.max_inner, "inner iteration cap");
  cmd->add_option("--max-outer", cfg.solver.max_outer, "outer sweep cap");
  cmd->add_flag("--random-order", cfg.solver.random_pair_order, "visit node pairs in a random order each sweep");
}

void add_sim_flags(CLI::App* cmd, RunConfig& cfg, Flags& flags) {
  cmd->add_option("--family", flags.family, "bipartite | polytree | scalefree | smallworld");
  cmd->add_option("--p", cfg.graph.p, "number of nodes");
  cmd->add_option("--n-per-block", cfg.sample.n_per_block, "interventional rows per node");
  cmd->add_option("--n-obs", cfg.sample.n_obs, "observational rows");
  cmd->add_option("--effect-size", cfg.sample.effect_size, "coefficient scale of the generator");
  cmd->add_option("--rewire-prob", cfg.graph.rewire_prob, "small-world rewiring probability");
}

std::string json_key(const CLI::Option* opt) {
  std::string name = opt->get_name(false, true);
  while (!name.empty() && name.front() == '-') name.erase(name.begin());
  for (char& c : name)
    if (c == '-') c = '_';
  return name;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  cfg.threads = dagcd::default_thread_count();
  Flags flags;
  std::string out_dir = ".";

  CLI::App app{"Sparse discrete Bayesian network structure estimation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", flags.config_file, "JSON file with option values; command-line flags take precedence");
  app.add_option("--seed", cfg.seed, "root random seed");
  app.add_option("--out", out_dir, "output directory");

  auto* simulate = app.add_subcommand("simulate", "generate a graph and a data set");
  add_sim_flags(simulate, cfg, flags);

  auto* fit = app.add_subcommand("fit", "fit the solution path and select a model");
  fit->add_option("--data", cfg.data, "CSV of 1-based levels")->required()->check(CLI::ExistingFile);
  fit->add_option("--interventions", flags.interventions, "CSV of row,node intervention pairs")->check(CLI::ExistingFile);
  fit->add_flag("--trace", cfg.trace, "write per-iteration convergence traces");
  fit->add_option("--match-edges", flags.match_edges, "pick the path entry closest to this edge count");
  add_model_flags(fit, cfg);

  auto* select = app.add_subcommand("select", "re-run model selection on a fit directory");
  select->add_option("--fit-dir", cfg.fit_dir, "output directory of a previous fit")->required()->check(CLI::ExistingDirectory);
  select->add_option("--alpha-select", cfg.path.alpha_select, "difference-ratio threshold");
  select->add_option("--match-edges", flags.match_edges, "pick the path entry closest to this edge count");

  auto* evaluate = app.add_subcommand("evaluate", "score an estimated edge list against the truth");
  evaluate->add_option("--truth", cfg.truth, "true edge list")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--estimate", cfg.estimate, "estimated edge list")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--p", cfg.graph.p, "number of nodes")->required();

  auto* bench = app.add_subcommand("bench", "simulate, fit and score replicate data sets");
  add_sim_flags(bench, cfg, flags);
  bench->add_option("--families", flags.families, "several families in one run");
  bench->add_option("--replicates", cfg.replicates, "data sets per family");
  bench->add_option("--threads", cfg.threads, "worker threads (default: DAGCD_THREADS or 1)");
  bench->add_option("--match-edges", flags.match_edges, "pick the path entry closest to this edge count");
  add_model_flags(bench, cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* cmd = app.get_subcommands().front();
    cfg.command = cmd->get_name();

    std::set<std::string> given;
    for (const auto* scope : {&app, cmd})
      for (const auto* opt : scope->get_options())
        if (opt->count() > 0) given.insert(json_key(opt));

    if (given.count("family") || !given.count("config")) cfg.graph.family = dagcd::parse_family(flags.family);
    for (const auto& f : flags.families) cfg.families.push_back(dagcd::parse_family(f));
    if (given.count("match_edges")) cfg.match_edges = flags.match_edges;
    if (given.count("interventions")) cfg.interventions = flags.interventions;
    cfg.out_dir = out_dir;
    if (!flags.config_file.empty()) {
      std::ifstream in(flags.config_file);
      if (!in) throw std::runtime_error("cannot open " + flags.config_file);
      dagcd::apply_json_config(cfg, nlohmann::json::parse(in), given);
    }

    if (cfg.command == "simulate") return dagcd::run_simulate(cfg);
    if (cfg.command == "fit") return dagcd::run_fit(cfg);
    if (cfg.command == "select") return dagcd::run_select(cfg);
    if (cfg.command == "evaluate") return dagcd::run_evaluate(cfg);
    return dagcd::run_bench(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dagcd::kExitFailure;
  }
}
