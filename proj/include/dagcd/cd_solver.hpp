#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dagcd/dataset.hpp"
#include "dagcd/graph.hpp"
#include "dagcd/multilogit.hpp"

namespace dagcd {

struct SolverConfig {
  double b = 1e-3;          ///< lower bound on the Hessian surrogate magnitude
  double eta = 0.9;         ///< backtracking factor
  double delta = 0.9;       ///< sufficient-decrease factor
  double alpha0 = 1.0;      ///< initial step
  double inner_tol = 1e-4;  ///< max-norm parameter change that ends an inner loop
  int max_inner = 200;
  int max_outer = 5;
  int max_backtracks = 50;
  bool random_pair_order = false;
  std::uint64_t order_seed = 0;

  void validate() const;
};

/**
 * Closed-form minimizer of the penalized quadratic surrogate for one group:
 * with d = grad - h * beta_cur, returns 0 when ||d|| <= lam_w and
 * -(1/h) (d - lam_w d / ||d||) otherwise. Requires h < 0.
 */
std::vector<double> group_prox_update(std::span<const double> grad, std::span<const double> beta_cur, double h,
                                      double lam_w);

struct ArmijoResult {
  double alpha = 0.0;
  int backtracks = 0;
  bool stalled = false;           ///< no admissible step within max_backtracks
  double objective_change = 0.0;  ///< change in f_{lambda,j}, <= 0 when accepted
};

/**
 * Backtracking line search along s = proposal - beta_{j.i} for f_{lambda,j}.
 * Accepts the largest alpha in {alpha0 * eta^k} with
 * f(beta + alpha s) - f(beta) <= alpha * delta * Delta and writes the step
 * into `beta`. Throws std::invalid_argument if proposal equals the current group.
 */
ArmijoResult armijo_step(ParamVector& beta, const CategoricalDataset& ds, const SolverConfig& cfg,
                         const PenaltyConfig& pen, int node, int parent, std::span<const double> proposal);

/**
 * Unpenalized update of beta_{j.0} with the surrogate curvature h_{j0}
 * evaluated at the current beta. beta_{j10} is held at zero.
 */
void intercept_update(ParamVector& beta, const CategoricalDataset& ds, const SolverConfig& cfg, int node);

struct TraceRow {
  int lambda_index = 0;  ///< 0-based path position; set by the path driver
  int sweep = 0;
  int iteration = 0;  ///< 0 for the pairwise pass, 1.. for inner iterations
  double objective = 0.0;
  double max_change = 0.0;
  std::size_t active_edges = 0;
};

struct SweepStats {
  int sweep = 0;
  int inner_iterations = 0;
  bool inner_converged = true;
  int line_search_stalls = 0;
  std::size_t active_edges = 0;
  bool active_set_changed = false;
};

struct SolveStatus {
  int sweeps = 0;
  bool stable = false;  ///< active set unchanged by the last sweep
  bool inner_capped = false;
  int line_search_stalls = 0;

  bool stalled() const { return inner_capped || line_search_stalls > 0; }
};

/**
 * Blockwise coordinate descent for the adaptive group Lasso multi-logit DAG
 * estimator at a fixed penalty.
 *
 * The solver owns the current beta together with per-node cached linear
 * predictors, the induced graph and the frozen Hessian surrogates h_ji. The
 * surrogates are computed on construction and whenever
 * refresh_hessian_bounds() is called (the path calls it once per lambda).
 *
 * Not thread-safe; one instance per dataset and thread.
 */
class CdSolver {
 public:
  using SweepObserver = std::function<void(const SweepStats&, const CdSolver&)>;

  CdSolver(const CategoricalDataset& ds, ParamVector beta, SolverConfig cfg);

  const ParamVector& beta() const { return beta_; }
  const DagStructure& graph() const { return graph_; }
  const SolverConfig& config() const { return cfg_; }
  const CategoricalDataset& dataset() const { return *ds_; }

  void refresh_hessian_bounds();
  double hessian(int node, int parent) const {
    return parent == kIntercept ? h0_[node] : h_[static_cast<std::size_t>(node) * p_ + parent];
  }

  double objective(const PenaltyConfig& pen) const;

  /// Outer loop: sweeps until the active edge set survives a sweep after the first unchanged, or max_outer is reached.
  SolveStatus solve(const PenaltyConfig& pen);
  /// One pass over all node pairs, then intercepts, then the inner loop.
  SweepStats sweep(const PenaltyConfig& pen);
  /// Cycles over the current active groups and intercepts until convergence.
  SweepStats inner_loop(const PenaltyConfig& pen);
  void update_intercepts();

  void set_sweep_observer(SweepObserver observer) { observer_ = std::move(observer); }
  void set_trace(std::vector<TraceRow>* trace) { trace_ = trace; }

  /// Largest objective increase seen across accepted steps, when auditing is on.
  void enable_descent_audit(bool on) { audit_ = on; }
  double worst_objective_increase() const { return worst_increase_; }

 private:
  struct StepResult {
    double change = 0.0;  // max-norm of the applied step
    bool moved = false;
    bool stalled = false;
  };

  StepResult group_step(int node, int parent, double lam_w);
  StepResult intercept_step(int node);
  /// Runs group_step on one group until convergence; returns f_{lambda,node}(0) - f_{lambda,node}(minimizer).
  double minimize_group(int node, int parent, double lam_w);
  void set_group_zero(int node, int parent);
  bool screened(int node, int parent, double lam_w);
  void process_pair(int i, int j, const PenaltyConfig& pen);
  void audit_checkpoint(const PenaltyConfig& pen);

  const CategoricalDataset* ds_;
  int p_;
  SolverConfig cfg_;
  ParamVector beta_;
  std::vector<NodeLikelihood> nodes_;
  DagStructure graph_;
  std::vector<double> h_;
  std::vector<double> h0_;
  std::vector<int> backtrack_hint_;  // last accepted backtrack count per group
  std::vector<double> grad_buf_;
  std::vector<double> prop_buf_;
  std::vector<double> step_buf_;
  int sweep_count_ = 0;
  int stalls_ = 0;
  SweepObserver observer_;
  std::vector<TraceRow>* trace_ = nullptr;
  const PenaltyConfig* current_pen_ = nullptr;
  bool audit_ = false;
  bool audit_steps_ = true;
  double audit_last_ = 0.0;
  double worst_increase_ = 0.0;
};

struct KktReport {
  double worst_zero_excess = 0.0;    ///< max of ||grad|| - lambda w - 1e-4 (1 + lambda w) over checked zero groups
  double worst_active_residual = 0.0;
  double worst_intercept_residual = 0.0;
  std::size_t zero_groups_checked = 0;
  std::size_t active_groups_checked = 0;

  bool passed(double active_tol = 1e-3) const {
    return worst_zero_excess <= 0.0 && worst_active_residual <= active_tol && worst_intercept_residual <= active_tol;
  }
};

/**
 * Stationarity audit at a fixed active set. Zero groups are checked only
 * where the edge is feasible: the reverse group is zero and adding the edge
 * would not close a cycle.
 */
KktReport kkt_audit(const ParamVector& beta, const CategoricalDataset& ds, const PenaltyConfig& pen);

}  // namespace dagcd
