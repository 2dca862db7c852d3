#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "dagcd/cd_solver.hpp"
#include "dagcd/dataset.hpp"
#include "dagcd/graph.hpp"
#include "dagcd/multilogit.hpp"

namespace dagcd {

/// Weight standing in for an infinite adaptive weight.
inline constexpr double kMaxWeight = 1e12;
/// Ridge used by the unpenalized refits.
inline constexpr double kRefitRidge = 1e-6;

struct PathConfig {
  int grid_size = 30;         ///< J
  double ratio = 0.1;         ///< lambda_J / lambda_1, log-linear spacing
  double gamma = 1.0;         ///< adaptive-weight exponent
  double alpha_select = 0.1;  ///< difference-ratio threshold
  bool warm_start = true;

  void validate() const;
};

struct PathEntry {
  double lambda = 0.0;
  ParamVector beta;
  DagStructure graph;
  std::size_t edges = 0;
  double penalized_objective = 0.0;
  double refit_loglik = 0.0;
  bool refit_converged = true;
  SolveStatus status;
};

struct SolutionPath {
  std::vector<PathEntry> entries;
  std::vector<TraceRow> trace;  ///< filled only when tracing was requested
  double worst_objective_increase = 0.0;  ///< only tracked with descent auditing on

  bool any_stalled() const;
};

/// Empty-model parameters: zero groups, intercepts at their MLE with guarded frequencies.
ParamVector empty_model(const CategoricalDataset& ds);

/**
 * Smallest lambda whose fit is the empty graph: max over pairs of
 * ||grad l_j(beta_{j.i} = 0)|| / w_ji at the empty model. Rounded up by a
 * relative 1e-9 so the first path entry stays empty in floating point.
 */
double lambda_max(const CategoricalDataset& ds, const PenaltyConfig& weights);

std::vector<double> lambda_grid(double lambda1, const PathConfig& cfg);

struct RefitResult {
  ParamVector beta;
  double loglik = 0.0;
  bool converged = true;
};

/**
 * Unpenalized multi-logit refits of every node on its parent set in `g`
 * (ridge kRefitRidge on the coefficients). Per-node results are memoized by
 * parent set, so one instance should be reused across a path.
 */
class Refitter {
 public:
  explicit Refitter(const CategoricalDataset& ds, double ridge = kRefitRidge) : ds_(&ds), ridge_(ridge) {}
  RefitResult operator()(const DagStructure& g);

 private:
  struct NodeFit {
    std::vector<double> blocks;  // intercepts then parent groups, symmetric centered form
    double loglik = 0.0;
    bool converged = true;
  };
  const NodeFit& fit_node(int node, const std::vector<int>& parents);

  const CategoricalDataset* ds_;
  double ridge_;
  std::map<std::pair<int, std::vector<int>>, NodeFit> cache_;
};

RefitResult refit_mle(const CategoricalDataset& ds, const DagStructure& g, double ridge = kRefitRidge);

struct Selection {
  std::size_t index = 0;  ///< 0-based path position of lambda_{m*}
  std::vector<double> dr;  ///< dr[m] = dr_{(m, m+1)}, 0-based, size J - 1
  bool degenerate = false;
};

Selection select_model(std::span<const std::size_t> edges, std::span<const double> refit_loglik, double alpha);
Selection select_model(const SolutionPath& path, double alpha);

/// Entry whose edge count is closest to `target`; ties go to the smaller count.
std::size_t match_edge_count(std::span<const std::size_t> edges, std::size_t target);
std::size_t match_edge_count(const SolutionPath& path, std::size_t target);

/// w_ji = w_ij = min(||b_{j.i}||^-gamma, ||b_{i.j}||^-gamma), kMaxWeight when both are zero.
PenaltyConfig weights_from_pilot(const ParamVector& pilot, double gamma);

struct PathOptions {
  bool trace = false;
  CdSolver::SweepObserver observer;
  bool audit_descent = false;
};

/// Warm-started fit over the log-linear lambda grid, with refits of every entry.
SolutionPath fit_path(const CategoricalDataset& ds, const PenaltyConfig& weights, const PathConfig& cfg,
                      const SolverConfig& solver, const PathOptions& options = {});

struct AdaptiveFit {
  SolutionPath pilot;
  Selection pilot_selection;
  PenaltyConfig weights;
  SolutionPath path;
  Selection selection;
  double worst_objective_increase = 0.0;

  const PathEntry& selected() const { return path.entries[selection.index]; }
};

/// Unit-weight pilot path, adaptive weights from its selected entry, then the final path.
AdaptiveFit fit_adaptive(const CategoricalDataset& ds, const PathConfig& cfg, const SolverConfig& solver,
                         const PathOptions& options = {});

}  // namespace dagcd
