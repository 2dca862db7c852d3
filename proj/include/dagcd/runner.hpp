#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagcd/cd_solver.hpp"
#include "dagcd/evalmetrics.hpp"
#include "dagcd/path_select.hpp"
#include "dagcd/simgen.hpp"

namespace dagcd {

inline constexpr int kFormatVersion = 1;

/// Exit codes shared by all subcommands.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitStalled = 2 };

struct RunConfig {
  std::string command;
  std::filesystem::path out_dir = ".";
  std::filesystem::path data;
  std::optional<std::filesystem::path> interventions;
  std::filesystem::path truth;
  std::filesystem::path estimate;
  std::filesystem::path fit_dir;  ///< `select` reads a previous `fit` output directory

  PathConfig path;
  SolverConfig solver;
  GraphSpec graph;
  SampleSpec sample;
  std::vector<GraphFamily> families;  ///< bench cells; empty means graph.family only

  std::uint64_t seed = 1;
  int replicates = 1;
  int threads = 1;
  bool trace = false;
  std::optional<std::size_t> match_edges;  ///< select by edge count instead of the difference ratio

  void validate() const;
};

/**
 * Fills fields from a JSON object whose keys are the long flag names with
 * dashes replaced by underscores ("n_per_block", "grid_size", ...). Keys in
 * `explicit_keys` were given on the command line and are left alone.
 */
void apply_json_config(RunConfig& cfg, const nlohmann::json& j, const std::set<std::string>& explicit_keys);
nlohmann::json to_json(const RunConfig& cfg);

/// Thread count from DAGCD_THREADS, or 1.
int default_thread_count();

int run_simulate(const RunConfig& cfg);
int run_fit(const RunConfig& cfg);
int run_select(const RunConfig& cfg);
int run_evaluate(const RunConfig& cfg);
int run_bench(const RunConfig& cfg);

/// Path summary CSV: m, lambda, edges, penalized_objective, refit_loglik, dr, selected_flag.
void write_path_csv(const SolutionPath& path, const Selection& selection, std::size_t chosen,
                    const std::filesystem::path& file);
void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& file);

struct ReplicateResult {
  int replicate = 0;
  bool ok = false;
  std::string error;
  EvalReport dag;
  EvalReport skeleton;
  bool stalled = false;
  int max_sweeps = 0;
  bool all_stable = true;
  std::size_t selected_index = 0;
  double seconds = 0.0;
};

/// One simulate-fit-score replicate; seeds come from derive_seed(cfg.seed, replicate, .).
ReplicateResult run_replicate(const RunConfig& cfg, GraphFamily family, int replicate);

}  // namespace dagcd
